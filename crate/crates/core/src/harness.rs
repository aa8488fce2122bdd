//! Experiment orchestration: data generation, training, held-out risk and reports.

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::circuit::{BqpBranch, Circuit, DispatcherSpec, StateVector};
use crate::clockham::verify_perfect_transfer;
use crate::concepts::{
    declared_eps2, evaluate_distinct, gen_dataset_streams, hard_instance, noisy_features, BasisSpec, Concept, ConceptSpec, Dataset,
    FeatureNoise, HamiltonianSource, InputDistribution, InputValue, LabelNoise, ShallowTemplate,
};
use crate::error::{Error, Result};
use crate::kitaev::{build_kitaev, verify_ground};
use crate::learners::bounds::{generalization_bound, sample_complexity, BoundReport, EpsBudget};
use crate::learners::flipped::flipped_solve;
use crate::learners::lasso::{lasso_train, LassoConfig, StepRule};
use crate::learners::shallow::{all_stabilizer_probes, shallow_learn, shallow_probe_count, stabilizer_expectation, Probe, ShallowLearnConfig};
use crate::learners::unitary::{unitary_param_learn, UnitaryLearnConfig};
use crate::pauli::{Pauli, PauliObservable, PauliString};
use crate::rng::{stream_rng, sub_seed, TEST_STREAM_OFFSET};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const REPORT_SCHEMA_VERSION: u32 = 1;

fn default_schema() -> u32 {
    CONFIG_SCHEMA_VERSION
}

fn default_n_test() -> usize {
    2000
}

fn default_reps() -> usize {
    1
}

fn default_delta() -> f64 {
    0.1
}

fn default_tau() -> f64 {
    std::f64::consts::PI
}

fn default_angle() -> f64 {
    std::f64::consts::PI
}

/// How the concept of an experiment is obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ConceptDescriptor {
    Explicit { spec: ConceptSpec },
    /// Weighted-clock concept of a seeded random decider circuit.
    HardInstance { n_work: usize, gates: usize, circuit_seed: u64 },
    /// Evolved concept with `terms` random nonzero coefficients, rescaled to `‖α‖₁ = l1`.
    RandomEvolved {
        hamiltonian: HamiltonianSource,
        #[serde(default = "default_tau")]
        tau: f64,
        basis: BasisSpec,
        terms: usize,
        l1: f64,
        alpha_seed: u64,
    },
    /// Dispatcher concept with a one-layer template, seeded angles in `[−angle, angle]`
    /// and a seeded random circuit on the `x₁ = 1` branch.
    RandomUnitary {
        n_s: usize,
        letters: [Pauli; 2],
        base_obs: PauliString,
        bqp_gates: usize,
        #[serde(default = "default_angle")]
        angle: f64,
        alpha_seed: u64,
    },
}

impl ConceptDescriptor {
    pub fn resolve(&self) -> Result<ConceptSpec> {
        match self {
            ConceptDescriptor::Explicit { spec } => Ok(spec.clone()),
            ConceptDescriptor::HardInstance { n_work, gates, circuit_seed } => {
                let c = Circuit::random(*n_work, *gates, &mut stream_rng(*circuit_seed, 0))?;
                hard_instance(&c, *n_work)
            }
            ConceptDescriptor::RandomEvolved {
                hamiltonian,
                tau,
                basis,
                terms,
                l1,
                alpha_seed,
            } => {
                let probe = Concept::build(&ConceptSpec::Evolved {
                    hamiltonian: hamiltonian.clone(),
                    tau: *tau,
                    basis: *basis,
                    alpha: vec![0.0; basis.enumerate(work_qubits(hamiltonian)?)?.len()],
                })?;
                let m = probe.basis().len();
                if *terms == 0 || *terms > m {
                    return Err(Error::invalid(format!("terms must lie in 1..={m}, got {terms}")));
                }
                let mut rng = stream_rng(*alpha_seed, 0);
                let mut idx: Vec<usize> = (0..m).collect();
                for i in 0..*terms {
                    let j = rng.random_range(i..m);
                    idx.swap(i, j);
                }
                let mut alpha = vec![0.0f64; m];
                for &i in &idx[..*terms] {
                    alpha[i] = rng.random_range(-1.0..=1.0);
                }
                let s: f64 = alpha.iter().map(|a| a.abs()).sum();
                if s > 0.0 {
                    alpha.iter_mut().for_each(|a| *a *= l1 / s);
                }
                if alpha.iter().any(|a| a.abs() > 1.0) {
                    return Err(Error::invalid(format!("l1 = {l1} forces a coefficient outside [-1, 1]")));
                }
                Ok(ConceptSpec::Evolved {
                    hamiltonian: hamiltonian.clone(),
                    tau: *tau,
                    basis: *basis,
                    alpha,
                })
            }
            ConceptDescriptor::RandomUnitary {
                n_s,
                letters,
                base_obs,
                bqp_gates,
                angle,
                alpha_seed,
            } => {
                let template = ShallowTemplate::single_layer(*n_s, *letters);
                let mut rng = stream_rng(*alpha_seed, 0);
                let alpha = (0..template.n_params()).map(|_| rng.random_range(-angle..=*angle)).collect();
                let bqp = Circuit::random(*n_s, *bqp_gates, &mut stream_rng(*alpha_seed, 1))?;
                Ok(ConceptSpec::UnitaryParam {
                    dispatcher: DispatcherSpec::shallow(*n_s, BqpBranch::OnInput(bqp))?,
                    template,
                    alpha,
                    base_obs: base_obs.clone(),
                })
            }
        }
    }
}

fn work_qubits(h: &HamiltonianSource) -> Result<usize> {
    Ok(match h {
        HamiltonianSource::Zero { n } | HamiltonianSource::Ising { n, .. } => *n,
        HamiltonianSource::ChildsClock { circuit } | HamiltonianSource::FeynmanClock { circuit } => circuit.n_qubits(),
        HamiltonianSource::File { path } => {
            let dim = crate::spectral::SparseHermitian::parse(&std::fs::read_to_string(path)?)?.dim();
            dim.trailing_zeros() as usize
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerConfig {
    /// ℓ1-ball regression. `B` defaults to `‖α‖₁`, `eps3` to `0.4 ε`.
    Lasso {
        #[serde(default, rename = "B")]
        b: Option<f64>,
        #[serde(default)]
        eps3: Option<f64>,
        #[serde(default)]
        step: StepRule,
        #[serde(default)]
        max_iters: Option<usize>,
        #[serde(default)]
        tol_residual: f64,
    },
    /// Stabilizer-probe learner for dispatcher concepts.
    Unitary {
        #[serde(default, flatten)]
        cfg: UnitaryLearnConfig,
    },
    /// Linear solve for flipped concepts.
    Flipped {
        #[serde(default)]
        lambda: f64,
    },
}

/// What the test risk is compared against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassTarget {
    #[default]
    Eps,
    /// `(ε′₁ + ε₂)² + ε₃` from the ε-budget.
    Composite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub concept: ConceptDescriptor,
    #[serde(default)]
    pub distribution: InputDistribution,
    /// Training size; derived from the learner's sample bound when absent.
    #[serde(default)]
    pub n_train: Option<u64>,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default)]
    pub noise: LabelNoise,
    #[serde(default)]
    pub features: FeatureNoise,
    pub learner: LearnerConfig,
    pub eps: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub target: PassTarget,
    /// Overrides the default split of `ε`; `eps2` and `eps3` are otherwise taken from the
    /// noise model and learner.
    #[serde(default)]
    pub budget: Option<EpsBudget>,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    /// Reads JSON, or TOML when the extension is `.toml`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "toml") {
            Self::from_toml(&text)
        } else {
            Ok(serde_json::from_str(&text)?)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0),
            msg: e.message().to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "config schema version {} unsupported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::invalid(format!("eps must be > 0, got {}", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.n_test == 0 {
            return Err(Error::invalid("n_test must be positive"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be positive"));
        }
        if self.n_train == Some(0) {
            return Err(Error::invalid("n_train must be positive"));
        }
        if let LabelNoise::Uniform { eps2 } = self.noise {
            if eps2 > self.eps {
                return Err(Error::invalid(format!("label noise eps2 = {eps2} exceeds eps = {}", self.eps)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub repetition: usize,
    pub seed: u64,
    pub train_mse: f64,
    /// Empirical `E_x |f(x) − h(x)|²` on held-out inputs.
    pub test_mse: f64,
    pub test_mse_stderr: f64,
    pub target: f64,
    pub pass: bool,
    pub bound: Option<BoundReport>,
    /// Share of training inputs with `x₁ = 1` (dispatcher concepts).
    pub x1_fraction: Option<f64>,
    pub label_audit_max_dev: f64,
    pub diagnostics: serde_json::Value,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub resolve_s: f64,
    pub data_s: f64,
    pub train_s: f64,
    pub test_s: f64,
    pub total_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub crate_version: String,
    pub os: String,
    pub arch: String,
    pub threads: usize,
}

impl Environment {
    pub fn current() -> Self {
        Environment {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            threads: rayon::current_num_threads(),
        }
    }
}

/// The deterministic part of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportPayload {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub concept: ConceptSpec,
    pub concept_fingerprint: String,
    pub m: usize,
    pub n_train: u64,
    /// `"override"` or the bound that produced `n_train`.
    pub n_train_source: String,
    pub n_test: usize,
    pub runs: Vec<RunReport>,
    pub pass_count: usize,
    pub pass: bool,
    pub mean_test_mse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    #[serde(flatten)]
    pub payload: ReportPayload,
    pub timing: PhaseTiming,
    pub environment: Environment,
}

impl ExperimentReport {
    /// JSON of everything except timing and environment.
    pub fn payload_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.payload)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        create_parent(path)?;
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent() {
        if !p.as_os_str().is_empty() {
            std::fs::create_dir_all(p)?;
        }
    }
    Ok(())
}

/// Seed of repetition `r`.
pub fn repetition_seed(seed: u64, r: usize) -> u64 {
    sub_seed(seed, &format!("rep{r}"))
}

struct Resolved {
    n_train: u64,
    source: String,
    lasso: Option<LassoConfig>,
}

fn resolve(cfg: &ExperimentConfig, concept: &Concept) -> Result<Resolved> {
    let m = concept.basis().len();
    let over = |n: u64| (n, "override".to_string());
    match &cfg.learner {
        LearnerConfig::Lasso {
            b,
            eps3,
            step,
            max_iters,
            tol_residual,
        } => {
            if concept.is_flipped() || concept.dispatcher().is_some() {
                return Err(Error::invalid("the lasso learner needs an evolved or ground-state concept"));
            }
            let b = b.unwrap_or_else(|| concept.alpha().iter().map(|a| a.abs()).sum());
            let eps3 = eps3.unwrap_or(EpsBudget::default_for(cfg.eps).eps3);
            let mut lc = LassoConfig {
                b,
                eps3,
                step: *step,
                tol_residual: *tol_residual,
                ..LassoConfig::default()
            };
            if let Some(it) = max_iters {
                lc.max_iters = *it;
            }
            lc.validate()?;
            let (n_train, source) = match cfg.n_train {
                Some(n) => over(n),
                None => (sample_complexity(b, m, cfg.delta, eps3)?.max(1), "sample_complexity".to_string()),
            };
            Ok(Resolved {
                n_train,
                source,
                lasso: Some(lc),
            })
        }
        LearnerConfig::Unitary { cfg: uc } => {
            let d = concept
                .dispatcher()
                .ok_or_else(|| Error::invalid("the unitary learner needs a unitary-parametrized concept"))?;
            uc.shallow.validate(d.n_s)?;
            let (n_train, source) = match cfg.n_train {
                Some(n) => over(n),
                None => (
                    2 * shallow_probe_count(d.n_s, uc.shallow.k_max, uc.shallow.eps, uc.shallow.delta)?,
                    "shallow_probe_count".to_string(),
                ),
            };
            Ok(Resolved { n_train, source, lasso: None })
        }
        LearnerConfig::Flipped { lambda } => {
            if !concept.is_flipped() {
                return Err(Error::invalid("the flipped learner needs a flipped concept"));
            }
            if !(lambda.is_finite() && *lambda >= 0.0) {
                return Err(Error::invalid("ridge parameter must be >= 0"));
            }
            let (n_train, source) = match cfg.n_train {
                Some(n) => over(n),
                None => (2 * concept.n_input() as u64, "twice_m".to_string()),
            };
            Ok(Resolved { n_train, source, lasso: None })
        }
    }
}

fn pass_target(cfg: &ExperimentConfig, concept: &Concept, res: &Resolved) -> f64 {
    match cfg.target {
        PassTarget::Eps => cfg.eps,
        PassTarget::Composite => {
            let budget = cfg.budget.unwrap_or_else(|| {
                let mut b = EpsBudget::default_for(cfg.eps);
                b.eps2 = declared_eps2(concept, cfg.noise);
                if let Some(l) = &res.lasso {
                    b.eps3 = l.eps3;
                }
                b
            });
            budget.composite()
        }
    }
}

/// Datasets of one repetition.
pub struct RunData {
    pub train: Dataset,
    pub test: Dataset,
}

fn features_for(concept: &Concept, inputs: &[InputValue], noise: FeatureNoise, seed: u64, offset: u64) -> Result<Vec<Vec<f64>>> {
    let table = evaluate_distinct(concept, inputs)?;
    let fseed = sub_seed(seed, "features");
    inputs
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let exact = table[&key_of(x)]
                .features
                .as_ref()
                .ok_or_else(|| Error::invalid("concept has no feature map"))?;
            noisy_features(exact, noise, &mut stream_rng(fseed, offset + i as u64))
        })
        .collect()
}

fn key_of(x: &InputValue) -> String {
    match x {
        InputValue::Bits(b) => b.to_string(),
        InputValue::Real(a) => format!("{a:?}"),
    }
}

fn mse_with_stderr(pred: &[f64], truth: &[f64]) -> (f64, f64) {
    let n = pred.len() as f64;
    let sq: Vec<f64> = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).collect();
    let mean = sq.iter().sum::<f64>() / n;
    let var = if sq.len() > 1 {
        sq.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, (var / n).sqrt())
}

fn bits_of(ds: &Dataset) -> Result<Vec<(BitString, f64)>> {
    ds.samples
        .iter()
        .map(|s| {
            s.x.bits()
                .cloned()
                .map(|b| (b, s.y))
                .ok_or_else(|| Error::invalid("expected bitstring inputs"))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn one_run(
    cfg: &ExperimentConfig,
    concept: &Concept,
    res: &Resolved,
    target: f64,
    r: usize,
    timing: &mut PhaseTiming,
    keep: Option<&mut Vec<RunData>>,
) -> Result<RunReport> {
    let seed = repetition_seed(cfg.seed, r);
    let t0 = Instant::now();
    let train = gen_dataset_streams(concept, &cfg.distribution, res.n_train as usize, cfg.noise, seed, 0).map_err(|e| e.in_phase("data"))?;
    let test = gen_dataset_streams(concept, &cfg.distribution, cfg.n_test, LabelNoise::Exact, seed, TEST_STREAM_OFFSET)
        .map_err(|e| e.in_phase("data"))?;
    let x_train: Vec<InputValue> = train.samples.iter().map(|s| s.x.clone()).collect();
    let x_test: Vec<InputValue> = test.samples.iter().map(|s| s.x.clone()).collect();
    let y_train = train.labels();
    timing.data_s += t0.elapsed().as_secs_f64();

    let (train_mse, preds, bound, diagnostics) = match &cfg.learner {
        LearnerConfig::Lasso { .. } => {
            let lc = res.lasso.as_ref().unwrap();
            let t1 = Instant::now();
            let phi = features_for(concept, &x_train, cfg.features, seed, 0).map_err(|e| e.in_phase("features"))?;
            let model = match lasso_train(&phi, &y_train, lc) {
                Ok(m) => m,
                Err(Error::LassoNotConverged { best, .. }) => *best,
                Err(e) => return Err(e.in_phase("train")),
            };
            let model = model
                .with_basis(concept.basis().iter().map(|p| p.label()).collect())
                .map_err(|e| e.in_phase("train"))?;
            timing.train_s += t1.elapsed().as_secs_f64();
            let t2 = Instant::now();
            let phi_test = features_for(concept, &x_test, cfg.features, seed, TEST_STREAM_OFFSET).map_err(|e| e.in_phase("test"))?;
            let preds = model.predict_many(&phi_test).map_err(|e| e.in_phase("test"))?;
            timing.test_s += t2.elapsed().as_secs_f64();
            let bound = generalization_bound(model.diagnostics.train_mse, lc.b, concept.basis().len(), phi.len(), cfg.delta)?;
            let diag = serde_json::json!({
                "B": lc.b,
                "eps3": lc.eps3,
                "w": model.w,
                "lasso": model.diagnostics,
            });
            (model.diagnostics.train_mse, preds, Some(bound), diag)
        }
        LearnerConfig::Unitary { cfg: uc } => {
            let t1 = Instant::now();
            let d = concept.dispatcher().unwrap();
            let pairs = bits_of(&train)?;
            let pred = unitary_param_learn(&pairs, d, uc).map_err(|e| e.in_phase("train"))?;
            let train_pred: Vec<f64> = pairs.iter().map(|(x, _)| pred.predict(x)).collect::<Result<_>>().map_err(|e| e.in_phase("train"))?;
            timing.train_s += t1.elapsed().as_secs_f64();
            let t2 = Instant::now();
            let preds: Vec<f64> = bits_of(&test)?
                .par_iter()
                .map(|(x, _)| pred.predict(x))
                .collect::<Result<_>>()
                .map_err(|e| e.in_phase("test"))?;
            timing.test_s += t2.elapsed().as_secs_f64();
            let id = pred.models[pred.identity_index].as_ref().unwrap();
            let diag = serde_json::json!({
                "n_probes": pred.n_probes,
                "skipped": pred.skipped,
                "learned_terms": id.observable.terms().map(|(a, p)| (p.label(), a)).collect::<Vec<_>>(),
                "warnings": id.warnings,
            });
            (mse_with_stderr(&train_pred, &y_train).0, preds, None, diag)
        }
        LearnerConfig::Flipped { lambda } => {
            let t1 = Instant::now();
            let rows: Vec<(Vec<f64>, f64)> = train
                .samples
                .iter()
                .map(|s| (s.x.real().unwrap_or_default().to_vec(), s.y))
                .collect();
            let sol = flipped_solve(&rows, *lambda).map_err(|e| e.in_phase("train"))?;
            let train_pred: Vec<f64> = rows.iter().map(|(a, _)| sol.predict(a)).collect::<Result<_>>()?;
            timing.train_s += t1.elapsed().as_secs_f64();
            let t2 = Instant::now();
            let preds: Vec<f64> = x_test
                .iter()
                .map(|x| sol.predict(x.real().unwrap_or_default()))
                .collect::<Result<_>>()
                .map_err(|e| e.in_phase("test"))?;
            timing.test_s += t2.elapsed().as_secs_f64();
            let truth = concept.flipped_truth().unwrap();
            let max_err = sol.v.iter().zip(truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let diag = serde_json::json!({
                "rank": sol.rank,
                "residual": sol.residual,
                "condition": sol.condition,
                "rank_deficient": sol.rank_deficient,
                "max_expectation_error": max_err,
            });
            (mse_with_stderr(&train_pred, &y_train).0, preds, None, diag)
        }
    };
    let (test_mse, stderr) = mse_with_stderr(&preds, &test.truth);
    let x1_fraction = concept.dispatcher().map(|_| {
        train.samples.iter().filter(|s| s.x.bits().is_some_and(|b| b.get(0))).count() as f64 / train.len() as f64
    });
    let audit = train.meta.audit_max_dev;
    if let Some(k) = keep {
        k.push(RunData { train, test });
    }
    Ok(RunReport {
        repetition: r,
        seed,
        train_mse,
        test_mse,
        test_mse_stderr: stderr,
        target,
        pass: test_mse <= target,
        bound,
        x1_fraction,
        label_audit_max_dev: audit,
        diagnostics,
    })
}

fn run_inner(cfg: &ExperimentConfig, mut keep: Option<&mut Vec<RunData>>) -> Result<ExperimentReport> {
    let start = Instant::now();
    cfg.validate()?;
    let spec = cfg.concept.resolve().map_err(|e| e.in_phase("concept"))?;
    let concept = Concept::build(&spec).map_err(|e| e.in_phase("concept"))?;
    cfg.distribution.validate(&concept).map_err(|e| e.in_phase("concept"))?;
    let res = resolve(cfg, &concept).map_err(|e| e.in_phase("config"))?;
    let target = pass_target(cfg, &concept, &res);
    let mut timing = PhaseTiming {
        resolve_s: start.elapsed().as_secs_f64(),
        ..Default::default()
    };
    let mut runs = Vec::with_capacity(cfg.repetitions);
    for r in 0..cfg.repetitions {
        runs.push(one_run(cfg, &concept, &res, target, r, &mut timing, keep.as_deref_mut())?);
    }
    timing.total_s = start.elapsed().as_secs_f64();
    let pass_count = runs.iter().filter(|r| r.pass).count();
    let mean_test_mse = runs.iter().map(|r| r.test_mse).sum::<f64>() / runs.len() as f64;
    Ok(ExperimentReport {
        payload: ReportPayload {
            schema_version: REPORT_SCHEMA_VERSION,
            config: cfg.clone(),
            concept_fingerprint: spec.fingerprint(),
            m: concept.basis().len(),
            concept: spec,
            n_train: res.n_train,
            n_train_source: res.source,
            n_test: cfg.n_test,
            pass: pass_count == runs.len(),
            pass_count,
            mean_test_mse,
            runs,
        },
        timing,
        environment: Environment::current(),
    })
}

/// Runs every repetition of an experiment. Passes iff each test risk is within target.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_inner(cfg, None)
}

/// Like [`run_experiment`], also returning the train and test datasets of each repetition.
pub fn run_experiment_with_data(cfg: &ExperimentConfig) -> Result<(ExperimentReport, Vec<RunData>)> {
    let mut data = Vec::new();
    let report = run_inner(cfg, Some(&mut data))?;
    Ok((report, data))
}

/// Writes `train_<r>.jsonl` and `test_<r>.jsonl` for each repetition.
pub fn write_datasets(dir: &Path, data: &[RunData]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (r, d) in data.iter().enumerate() {
        d.train.write_jsonl(std::io::BufWriter::new(std::fs::File::create(dir.join(format!("train_{r}.jsonl")))?))?;
        d.test.write_jsonl(std::io::BufWriter::new(std::fs::File::create(dir.join(format!("test_{r}.jsonl")))?))?;
    }
    Ok(())
}

/// One axis of a sweep grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum SweepAxis {
    NTrain(Vec<u64>),
    Eps(Vec<f64>),
    #[serde(rename = "B")]
    B(Vec<f64>),
    Noise(Vec<LabelNoise>),
}

impl SweepAxis {
    fn len(&self) -> usize {
        match self {
            SweepAxis::NTrain(v) => v.len(),
            SweepAxis::Eps(v) | SweepAxis::B(v) => v.len(),
            SweepAxis::Noise(v) => v.len(),
        }
    }

    fn apply(&self, i: usize, cfg: &mut ExperimentConfig) -> Result<()> {
        match self {
            SweepAxis::NTrain(v) => cfg.n_train = Some(v[i]),
            SweepAxis::Eps(v) => cfg.eps = v[i],
            SweepAxis::Noise(v) => cfg.noise = v[i],
            SweepAxis::B(v) => match &mut cfg.learner {
                LearnerConfig::Lasso { b, .. } => *b = Some(v[i]),
                _ => return Err(Error::invalid("the B axis applies to the lasso learner only")),
            },
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    #[serde(default)]
    pub axes: Vec<SweepAxis>,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::Parse {
                line: 0,
                msg: e.message().to_string(),
            })
        } else {
            Ok(serde_json::from_str(&text)?)
        }
    }

    /// Cartesian product of the axes, as per-axis value indices. No axes means no cells.
    pub fn cells(&self) -> Vec<Vec<usize>> {
        if self.axes.is_empty() {
            return Vec::new();
        }
        let mut out: Vec<Vec<usize>> = vec![Vec::new()];
        for a in &self.axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..a.len()).map(move |i| {
                        let mut p = prefix.clone();
                        p.push(i);
                        p
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub cell: usize,
    pub n_train: u64,
    pub eps: f64,
    #[serde(rename = "B")]
    pub b: Option<f64>,
    pub noise: String,
    pub repetitions: usize,
    pub mean_test_mse: f64,
    pub std_test_mse: f64,
    pub median_test_mse: f64,
    pub pass_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// One report per (cell, repetition), cell-major.
    pub reports: Vec<ExperimentReport>,
    pub aggregate: Vec<AggregateRow>,
}

impl SweepResult {
    pub fn aggregate_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.aggregate {
            w.serialize(row).map_err(|e| Error::invalid(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        let mut s = String::from_utf8(bytes).expect("csv writes UTF-8");
        if self.aggregate.is_empty() {
            s = "cell,n_train,eps,B,noise,repetitions,mean_test_mse,std_test_mse,median_test_mse,pass_fraction\n".into();
        }
        Ok(s)
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs every grid cell `repetitions` times; cells run in parallel.
pub fn sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.repetitions == 0 {
        return Err(Error::invalid("repetitions must be positive"));
    }
    let cells = cfg.cells();
    let mut cell_cfgs = Vec::with_capacity(cells.len());
    for idx in &cells {
        let mut c = cfg.base.clone();
        c.repetitions = 1;
        for (a, &i) in cfg.axes.iter().zip(idx) {
            a.apply(i, &mut c)?;
        }
        cell_cfgs.push(c);
    }
    let jobs: Vec<(usize, ExperimentConfig)> = cell_cfgs
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| {
            (0..cfg.repetitions).map(move |r| {
                let mut c = c.clone();
                c.seed = repetition_seed(cfg.base.seed, r);
                (ci, c)
            })
        })
        .collect();
    let reports: Vec<ExperimentReport> = jobs
        .par_iter()
        .map(|(ci, c)| run_experiment(c).map_err(|e| Error::invalid(format!("cell {ci}: {e}"))))
        .collect::<Result<_>>()?;
    let aggregate = cell_cfgs
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let rs = &reports[ci * cfg.repetitions..(ci + 1) * cfg.repetitions];
            let mut mses: Vec<f64> = rs.iter().map(|r| r.payload.mean_test_mse).collect();
            let n = mses.len() as f64;
            let mean = mses.iter().sum::<f64>() / n;
            let std = if mses.len() > 1 {
                (mses.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            AggregateRow {
                cell: ci,
                n_train: rs[0].payload.n_train,
                eps: c.eps,
                b: match &c.learner {
                    LearnerConfig::Lasso { .. } => rs[0].payload.runs[0].diagnostics.get("B").and_then(|v| v.as_f64()),
                    _ => None,
                },
                noise: serde_json::to_string(&c.noise).unwrap_or_default(),
                repetitions: rs.len(),
                mean_test_mse: mean,
                std_test_mse: std,
                median_test_mse: median(&mut mses),
                pass_fraction: rs.iter().filter(|r| r.payload.pass).count() as f64 / n,
            }
        })
        .collect();
    Ok(SweepResult { reports, aggregate })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub module: String,
    pub invariant: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub checks: Vec<CheckResult>,
    pub pass: bool,
    pub seconds: f64,
}

fn check(module: &str, invariant: &str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    let t = Instant::now();
    let (pass, detail) = match f() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckResult {
        module: module.into(),
        invariant: invariant.into(),
        pass,
        detail,
        seconds: t.elapsed().as_secs_f64(),
    }
}

/// Quick invariant checks across modules.
pub fn verify_suite(seed: u64) -> SuiteSummary {
    let start = Instant::now();
    let mut checks = Vec::new();

    checks.push(check("clockham", "perfect transfer at t = pi", || {
        let mut worst: f64 = 1.0;
        for i in 0..20 {
            let mut rng = stream_rng(seed, i);
            let n = rng.random_range(1..=3);
            let k = rng.random_range(1..=6);
            let c = Circuit::random(n, k, &mut rng)?;
            let psi = StateVector::basis(&BitString::from_index(rng.random_range(0..1usize << n), n))?;
            worst = worst.min(verify_perfect_transfer(&c, &psi, 1e-9)?.fidelity);
        }
        Ok((worst >= 1.0 - 1e-9, format!("min fidelity {worst:.12}")))
    }));

    checks.push(check("kitaev", "history state is a zero-energy gapped ground state", || {
        let mut worst_e: f64 = 0.0;
        let mut min_gap = f64::INFINITY;
        for i in 0..5 {
            let mut rng = stream_rng(seed, 100 + i);
            let n = rng.random_range(1..=2);
            let t = rng.random_range(1..=3);
            let c = Circuit::random(n, t, &mut rng)?;
            let x = BitString::from_index(rng.random_range(0..1usize << n), n);
            let h = build_kitaev(&c, &x)?;
            let psi = h.history_state()?;
            let rep = verify_ground(&h, &psi, 1e-9)?;
            worst_e = worst_e.max(rep.energy.abs());
            min_gap = min_gap.min(rep.gap);
            if !rep.pass {
                return Ok((false, format!("instance {i} failed: energy {:.3e}, gap {:.3e}", rep.energy, rep.gap)));
            }
        }
        Ok((true, format!("max |energy| {worst_e:.3e}, min gap {min_gap:.3e}")))
    }));

    checks.push(check("learners", "stabilizer estimator is exact under full enumeration", || {
        let obs = PauliObservable::new(
            vec!["XZ".parse()?, "YI".parse()?, "II".parse()?],
            vec![0.4, -0.7, 0.2],
        )?;
        let probes: Vec<Probe> = all_stabilizer_probes(2)
            .into_iter()
            .map(|l| Ok(Probe { value: stabilizer_expectation(&obs, &l)?, labels: l }))
            .collect::<Result<_>>()?;
        let m = shallow_learn(&probes, &ShallowLearnConfig { k_max: 2, threshold: 0.0, ..Default::default() })?;
        let err = m
            .raw
            .iter()
            .map(|(q, e)| {
                let want = obs.basis().iter().position(|p| p == q).map(|i| obs.alpha()[i]).unwrap_or(0.0);
                (e - want).abs()
            })
            .fold(0.0, f64::max);
        Ok((err < 1e-12, format!("max coefficient error {err:.3e}")))
    }));

    checks.push(check("learners", "lasso duality-gap certificate", || {
        let mut rng = stream_rng(seed, 200);
        let phi: Vec<Vec<f64>> = (0..20).map(|_| (0..3).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect();
        let y: Vec<f64> = phi.iter().map(|r| 0.6 * r[0] - 0.3 * r[2] + 0.05 * rng.random_range(-1.0..=1.0)).collect();
        let cfg = LassoConfig {
            b: 0.5,
            eps3: 1e-3,
            ..LassoConfig::default()
        };
        let m = lasso_train(&phi, &y, &cfg)?;
        let d = &m.diagnostics;
        Ok((
            d.converged && d.certified_gap <= cfg.eps3 / 2.0 && m.l1_norm() <= cfg.b + 1e-12,
            format!("gap {:.3e}, |w|_1 {:.6}", d.certified_gap, m.l1_norm()),
        ))
    }));

    checks.push(check("learners", "sample complexity arithmetic", || {
        let n = sample_complexity(1.0, 4, 0.1, 0.4)?;
        Ok((n == 38, format!("N = {n}")))
    }));

    let pass = checks.iter().all(|c| c.pass);
    SuiteSummary {
        checks,
        pass,
        seconds: start.elapsed().as_secs_f64(),
    }
}

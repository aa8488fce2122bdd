//! Command-line front end. `run` returns the process exit code.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use crate::bits::BitString;
use crate::circuit::{Circuit, StateVector};
use crate::clockham::{build_childs_weighted, build_feynman_clock, transfer_report, verify_perfect_transfer, TRANSFER_TIME};
use crate::concepts::{evaluate_distinct, gen_dataset_streams, noisy_features, Concept, ConceptSpec, Dataset, FeatureNoise, InputDistribution, LabelNoise};
use crate::error::{Error, Result};
use crate::harness::{run_experiment_with_data, sweep, verify_suite, write_datasets, ConceptDescriptor, ExperimentConfig, SweepConfig};
use crate::kitaev::{build_kitaev, verify_ground};
use crate::learners::flipped::flipped_solve;
use crate::learners::lasso::{lasso_train, LassoConfig, StepRule};
use crate::learners::shallow::{shallow_learn, Probe, ShallowLearnConfig};
use crate::rng::{stream_rng, sub_seed};
use crate::spectral::{evolve_with, EvolveMethod, SparseHermitian};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "obslearn", version, about = "Learning quantum observables: builders, learners and experiments")]
pub struct Cli {
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker thread cap (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for every random choice of the subcommand.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a labeled dataset as JSON lines.
    GenDataset(GenDatasetArgs),
    /// Fit an ℓ1-constrained linear model to features and labels.
    TrainLasso(TrainLassoArgs),
    /// Learn a low-support observable from stabilizer probes.
    ShallowLearn(ShallowLearnArgs),
    /// Solve the flipped-concept linear system.
    FlippedSolve(FlippedSolveArgs),
    /// Check perfect state transfer of the weighted clock Hamiltonian.
    ClockVerify(ClockVerifyArgs),
    /// Check the Kitaev history state is a gapped zero-energy ground state.
    KitaevVerify(KitaevVerifyArgs),
    /// Evolve a basis state under a Hamiltonian.
    Evolve(EvolveArgs),
    /// Run one experiment from a config file.
    Experiment(ExperimentArgs),
    /// Run a grid of experiments.
    Sweep(SweepArgs),
    /// Run the built-in invariant checks.
    VerifySuite,
}

#[derive(Args, Debug)]
pub struct GenDatasetArgs {
    /// Concept file: a concept spec, or a descriptor with a `source` field.
    #[arg(long)]
    pub concept: PathBuf,
    /// Input distribution file (default uniform).
    #[arg(long)]
    pub distribution: Option<PathBuf>,
    #[arg(long)]
    pub count: usize,
    /// `exact`, `uniform:<eps2>` or `shots:<s>`.
    #[arg(long, default_value = "exact")]
    pub noise: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the feature vectors, one JSON array per line.
    #[arg(long)]
    pub features_out: Option<PathBuf>,
    /// `exact` or `shots:<s>` for the written features.
    #[arg(long, default_value = "exact")]
    pub feature_noise: String,
}

#[derive(Args, Debug)]
pub struct TrainLassoArgs {
    /// JSON lines, one feature array per line.
    #[arg(long)]
    pub features: PathBuf,
    /// JSON lines of numbers, or a dataset file.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long = "B", default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value_t = 0.02)]
    pub eps3: f64,
    #[arg(long, default_value_t = 200_000)]
    pub max_iters: usize,
    #[arg(long, value_enum, default_value_t = StepArg::Fixed)]
    pub step: StepArg,
    /// JSON array of basis labels stored in the model.
    #[arg(long)]
    pub basis: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum StepArg {
    Fixed,
    Backtracking,
}

#[derive(Args, Debug)]
pub struct ShallowLearnArgs {
    /// JSON lines `{"labels": [...], "value": v}`.
    #[arg(long)]
    pub probes: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub k_max: usize,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.05)]
    pub threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FlippedSolveArgs {
    /// A flipped-concept dataset file, or JSON lines `{"alpha": [...], "y": v}`.
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClockVerifyArgs {
    /// Gate count of each random circuit.
    #[arg(long, default_value_t = 4)]
    pub gates: usize,
    /// Work qubits.
    #[arg(long, default_value_t = 2)]
    pub work: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Circuit file instead of random circuits.
    #[arg(long)]
    pub circuit: Option<PathBuf>,
    /// Use the unweighted clock (transfer is not expected to be perfect).
    #[arg(long)]
    pub feynman: bool,
}

#[derive(Args, Debug)]
pub struct KitaevVerifyArgs {
    #[arg(long, default_value_t = 2)]
    pub work: usize,
    #[arg(long, default_value_t = 3)]
    pub gates: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long)]
    pub circuit: Option<PathBuf>,
    /// Input bitstring (random when absent).
    #[arg(long)]
    pub input: Option<String>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum MethodArg {
    Auto,
    Dense,
    Krylov,
}

#[derive(Args, Debug)]
pub struct EvolveArgs {
    /// Operator dump file.
    #[arg(long, conflicts_with = "circuit")]
    pub operator: Option<PathBuf>,
    /// Circuit file; evolves under its weighted clock Hamiltonian.
    #[arg(long)]
    pub circuit: Option<PathBuf>,
    /// Evolution time (default pi).
    #[arg(long)]
    pub time: Option<f64>,
    /// Basis index of the initial state.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
    /// Write the operator dump here.
    #[arg(long)]
    pub dump_operator: Option<PathBuf>,
    /// Write the final amplitudes as JSON `[[re, im], ...]`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for the generated train and test datasets.
    #[arg(long)]
    pub datasets: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for per-run reports and `aggregate.csv`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Outcome of a subcommand: a JSON result and whether its check passed.
struct Outcome {
    value: serde_json::Value,
    text: String,
    pass: bool,
}

impl Outcome {
    fn ok(value: serde_json::Value, text: String) -> Self {
        Outcome { value, text, pass: true }
    }
}

fn echo_config<T: Serialize>(cfg: &T) {
    if let Ok(s) = serde_json::to_string(cfg) {
        eprintln!("resolved config: {s}");
    }
}

fn open(path: &Path) -> Result<BufReader<std::fs::File>> {
    std::fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    if let Some(p) = path.parent() {
        if !p.as_os_str().is_empty() {
            std::fs::create_dir_all(p)?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn json_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: format!("{}: {e}", path.display()),
        })?);
    }
    Ok(out)
}

fn is_dataset(path: &Path) -> Result<bool> {
    let mut first = String::new();
    open(path)?.read_line(&mut first)?;
    Ok(first.trim_start().starts_with("{\"meta\""))
}

/// `exact`, `uniform:<eps2>` or `shots:<s>`.
pub fn parse_label_noise(s: &str) -> Result<LabelNoise> {
    let bad = || Error::invalid(format!("noise must be exact, uniform:<eps2> or shots:<s>, got {s:?}"));
    match s.split_once(':') {
        None if s == "exact" => Ok(LabelNoise::Exact),
        Some(("uniform", v)) => Ok(LabelNoise::Uniform { eps2: v.parse().map_err(|_| bad())? }),
        Some(("shots", v)) => Ok(LabelNoise::Shots { shots: v.parse().map_err(|_| bad())? }),
        _ => Err(bad()),
    }
}

pub fn parse_feature_noise(s: &str) -> Result<FeatureNoise> {
    match parse_label_noise(s)? {
        LabelNoise::Exact => Ok(FeatureNoise::Exact),
        LabelNoise::Shots { shots } => Ok(FeatureNoise::Shots { shots }),
        LabelNoise::Uniform { .. } => Err(Error::invalid("feature noise must be exact or shots:<s>")),
    }
}

fn load_concept(path: &Path) -> Result<ConceptSpec> {
    let v: serde_json::Value = serde_json::from_str(&read(path)?)?;
    if v.get("source").is_some() {
        serde_json::from_value::<ConceptDescriptor>(v)?.resolve()
    } else {
        Ok(serde_json::from_value(v)?)
    }
}

fn gen_dataset_cmd(a: &GenDatasetArgs, seed: u64) -> Result<Outcome> {
    let spec = load_concept(&a.concept)?;
    let dist: InputDistribution = match &a.distribution {
        Some(p) => serde_json::from_str(&read(p)?)?,
        None => InputDistribution::Uniform,
    };
    let noise = parse_label_noise(&a.noise)?;
    let fnoise = parse_feature_noise(&a.feature_noise)?;
    echo_config(&json!({"concept": spec, "distribution": dist, "count": a.count, "noise": noise, "seed": seed}));
    let concept = Concept::build(&spec)?;
    let ds = gen_dataset_streams(&concept, &dist, a.count, noise, seed, 0)?;
    if let Some(p) = a.out.parent() {
        if !p.as_os_str().is_empty() {
            std::fs::create_dir_all(p)?;
        }
    }
    ds.write_jsonl(std::io::BufWriter::new(std::fs::File::create(&a.out)?))?;
    if let Some(fp) = &a.features_out {
        let inputs: Vec<_> = ds.samples.iter().map(|s| s.x.clone()).collect();
        let table = evaluate_distinct(&concept, &inputs)?;
        let fseed = sub_seed(seed, "features");
        let mut text = String::new();
        for (i, x) in inputs.iter().enumerate() {
            let key = match x {
                crate::concepts::InputValue::Bits(b) => b.to_string(),
                crate::concepts::InputValue::Real(r) => format!("{r:?}"),
            };
            let exact = table[&key].features.as_ref().ok_or_else(|| Error::invalid("concept has no feature map"))?;
            let phi = noisy_features(exact, fnoise, &mut stream_rng(fseed, i as u64))?;
            text.push_str(&serde_json::to_string(&phi)?);
            text.push('\n');
        }
        write_out(fp, &text)?;
    }
    Ok(Outcome::ok(
        json!({"out": a.out, "meta": ds.meta}),
        format!("wrote {} samples to {} (max label deviation {:.3e})", ds.len(), a.out.display(), ds.meta.audit_max_dev),
    ))
}

fn read_labels(path: &Path) -> Result<Vec<f64>> {
    if is_dataset(path)? {
        return Ok(Dataset::read_jsonl(open(path)?)?.labels());
    }
    json_lines(path)
}

fn train_lasso_cmd(a: &TrainLassoArgs) -> Result<Outcome> {
    let cfg = LassoConfig {
        b: a.b,
        eps3: a.eps3,
        max_iters: a.max_iters,
        step: match a.step {
            StepArg::Fixed => StepRule::Fixed,
            StepArg::Backtracking => StepRule::Backtracking,
        },
        tol_residual: 0.0,
    };
    echo_config(&cfg);
    let phi: Vec<Vec<f64>> = json_lines(&a.features)?;
    let y = read_labels(&a.labels)?;
    let (model, pass) = match lasso_train(&phi, &y, &cfg) {
        Ok(m) => (m, true),
        Err(Error::LassoNotConverged { best, .. }) => (*best, false),
        Err(e) => return Err(e),
    };
    let model = match &a.basis {
        Some(p) => model.with_basis(serde_json::from_str(&read(p)?)?)?,
        None => model,
    };
    let text = serde_json::to_string_pretty(&model)?;
    if let Some(out) = &a.out {
        write_out(out, &(text.clone() + "\n"))?;
    }
    let d = &model.diagnostics;
    Ok(Outcome {
        value: serde_json::to_value(&model)?,
        text: format!(
            "train MSE {:.6e}, certified gap {:.3e}, {} iterations, converged {}",
            d.train_mse, d.certified_gap, d.iterations, d.converged
        ),
        pass,
    })
}

fn shallow_cmd(a: &ShallowLearnArgs) -> Result<Outcome> {
    let cfg = ShallowLearnConfig {
        k_max: a.k_max,
        eps: a.eps,
        delta: a.delta,
        threshold: a.threshold,
    };
    echo_config(&cfg);
    let probes: Vec<Probe> = json_lines(&a.probes)?;
    let model = shallow_learn(&probes, &cfg)?;
    if let Some(out) = &a.out {
        write_out(out, &(serde_json::to_string_pretty(&model)? + "\n"))?;
    }
    for w in &model.warnings {
        eprintln!("warning: {w}");
    }
    let terms: Vec<String> = model.observable.terms().map(|(c, p)| format!("{c:+.4} {p}")).collect();
    Ok(Outcome::ok(serde_json::to_value(&model.observable)?, format!("learned O' = {}", terms.join(" "))))
}

#[derive(serde::Deserialize)]
struct FlippedRow {
    alpha: Vec<f64>,
    y: f64,
}

fn flipped_cmd(a: &FlippedSolveArgs) -> Result<Outcome> {
    echo_config(&json!({"samples": a.samples, "lambda": a.lambda}));
    let rows: Vec<(Vec<f64>, f64)> = if is_dataset(&a.samples)? {
        Dataset::read_jsonl(open(&a.samples)?)?
            .samples
            .into_iter()
            .map(|s| {
                s.x.real()
                    .map(|r| (r.to_vec(), s.y))
                    .ok_or_else(|| Error::invalid("dataset inputs are not coefficient vectors"))
            })
            .collect::<Result<_>>()?
    } else {
        json_lines::<FlippedRow>(&a.samples)?.into_iter().map(|r| (r.alpha, r.y)).collect()
    };
    let sol = flipped_solve(&rows, a.lambda)?;
    if let Some(out) = &a.out {
        write_out(out, &(serde_json::to_string_pretty(&sol)? + "\n"))?;
    }
    if sol.rank_deficient {
        eprintln!("warning: rank {} < {}; returned the minimum-norm solution", sol.rank, sol.v.len());
    }
    Ok(Outcome::ok(
        serde_json::to_value(&sol)?,
        format!("rank {}, residual {:.3e}, condition {:.3e}", sol.rank, sol.residual, sol.condition),
    ))
}

fn clock_cmd(a: &ClockVerifyArgs, seed: u64) -> Result<Outcome> {
    echo_config(&json!({"gates": a.gates, "work": a.work, "tol": a.tol, "trials": a.trials, "feynman": a.feynman, "seed": seed}));
    if a.trials == 0 {
        return Err(Error::invalid("trials must be positive"));
    }
    let mut reports = Vec::new();
    for i in 0..a.trials {
        let mut rng = stream_rng(seed, i as u64);
        let c = match &a.circuit {
            Some(p) => Circuit::parse(&read(p)?)?,
            None => Circuit::random(a.work, a.gates, &mut rng)?,
        };
        let n = c.n_qubits();
        let psi = StateVector::basis(&BitString::from_index(rng.random_range(0..1usize << n), n))?;
        let rep = if a.feynman {
            transfer_report(&build_feynman_clock(&c)?, &psi, TRANSFER_TIME, a.tol)?
        } else {
            verify_perfect_transfer(&c, &psi, a.tol)?
        };
        reports.push(rep);
    }
    let pass = reports.iter().all(|r| r.pass);
    let min_f = reports.iter().map(|r| r.fidelity).fold(f64::INFINITY, f64::min);
    let max_leak = reports.iter().map(|r| r.leakage).fold(0.0, f64::max);
    Ok(Outcome {
        value: json!({"pass": pass, "min_fidelity": min_f, "max_leakage": max_leak, "reports": reports}),
        text: format!(
            "fidelity {min_f:.12} (min over {} trials), leakage {max_leak:.3e}, {}",
            reports.len(),
            if pass { "PASS" } else { "FAIL" }
        ),
        pass,
    })
}

fn kitaev_cmd(a: &KitaevVerifyArgs, seed: u64) -> Result<Outcome> {
    echo_config(&json!({"work": a.work, "gates": a.gates, "tol": a.tol, "trials": a.trials, "seed": seed}));
    if a.trials == 0 {
        return Err(Error::invalid("trials must be positive"));
    }
    let mut reports = Vec::new();
    for i in 0..a.trials {
        let mut rng = stream_rng(seed, i as u64);
        let c = match &a.circuit {
            Some(p) => Circuit::parse(&read(p)?)?,
            None => Circuit::random(a.work, a.gates, &mut rng)?,
        };
        let n = c.n_qubits();
        let x = match &a.input {
            Some(s) => s.parse::<BitString>()?,
            None => BitString::from_index(rng.random_range(0..1usize << n), n),
        };
        let h = build_kitaev(&c, &x)?;
        let psi = h.history_state()?;
        reports.push(verify_ground(&h, &psi, a.tol)?);
    }
    let pass = reports.iter().all(|r| r.pass);
    let max_e = reports.iter().map(|r| r.energy.abs()).fold(0.0, f64::max);
    let min_gap = reports.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min);
    Ok(Outcome {
        value: json!({"pass": pass, "max_energy": max_e, "min_gap": min_gap, "reports": reports}),
        text: format!("history energy {max_e:.3e}, gap {min_gap:.6}, {}", if pass { "PASS" } else { "FAIL" }),
        pass,
    })
}

fn evolve_cmd(a: &EvolveArgs) -> Result<Outcome> {
    let t = a.time.unwrap_or(TRANSFER_TIME);
    echo_config(&json!({"operator": a.operator, "circuit": a.circuit, "time": t, "index": a.index}));
    let h: SparseHermitian = match (&a.operator, &a.circuit) {
        (Some(p), _) => SparseHermitian::parse(&read(p)?)?,
        (None, Some(p)) => build_childs_weighted(&Circuit::parse(&read(p)?)?)?.operator().clone(),
        (None, None) => return Err(Error::invalid("give --operator or --circuit")),
    };
    if a.index >= h.dim() {
        return Err(Error::invalid(format!("index {} outside dimension {}", a.index, h.dim())));
    }
    if let Some(p) = &a.dump_operator {
        write_out(p, &h.dump())?;
    }
    let mut psi = vec![crate::C64::new(0.0, 0.0); h.dim()];
    psi[a.index] = crate::C64::new(1.0, 0.0);
    let method = match a.method {
        MethodArg::Auto => EvolveMethod::Auto,
        MethodArg::Dense => EvolveMethod::Dense,
        MethodArg::Krylov => EvolveMethod::Krylov,
    };
    let out = evolve_with(&h, &psi, t, method)?;
    let amps: Vec<[f64; 2]> = out.iter().map(|c| [c.re, c.im]).collect();
    if let Some(p) = &a.out {
        write_out(p, &(serde_json::to_string(&amps)? + "\n"))?;
    }
    let norm = out.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let (imax, pmax) = out
        .iter()
        .enumerate()
        .map(|(i, c)| (i, c.norm_sqr()))
        .fold((0, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
    Ok(Outcome::ok(
        json!({"dim": h.dim(), "time": t, "norm": norm, "argmax": imax, "max_probability": pmax, "amplitudes": if a.out.is_none() { Some(amps) } else { None }}),
        format!("dim {}, t = {t}, norm {norm:.12}, most likely index {imax} (p = {pmax:.6})", h.dim()),
    ))
}

fn experiment_cmd(a: &ExperimentArgs) -> Result<Outcome> {
    let cfg = ExperimentConfig::load(&a.config)?;
    echo_config(&cfg);
    let (report, data) = run_experiment_with_data(&cfg)?;
    report.write_json(&a.out)?;
    if let Some(dir) = &a.datasets {
        write_datasets(dir, &data)?;
    }
    let p = &report.payload;
    Ok(Outcome {
        value: serde_json::to_value(&report)?,
        text: format!(
            "N_train {} ({}), mean test MSE {:.6e} vs target {:.4e}, {}/{} runs pass, {}",
            p.n_train,
            p.n_train_source,
            p.mean_test_mse,
            p.runs[0].target,
            p.pass_count,
            p.runs.len(),
            if p.pass { "PASS" } else { "FAIL" }
        ),
        pass: p.pass,
    })
}

fn sweep_cmd(a: &SweepArgs) -> Result<Outcome> {
    let cfg = SweepConfig::load(&a.config)?;
    echo_config(&cfg);
    let res = sweep(&cfg)?;
    std::fs::create_dir_all(&a.out_dir)?;
    let reps = cfg.repetitions;
    for (i, r) in res.reports.iter().enumerate() {
        r.write_json(&a.out_dir.join(format!("cell{}_rep{}.json", i / reps, i % reps)))?;
    }
    write_out(&a.out_dir.join("aggregate.csv"), &res.aggregate_csv()?)?;
    Ok(Outcome::ok(
        serde_json::to_value(&res.aggregate)?,
        format!("{} reports, {} cells written to {}", res.reports.len(), res.aggregate.len(), a.out_dir.display()),
    ))
}

fn suite_cmd(seed: u64) -> Result<Outcome> {
    echo_config(&json!({"seed": seed}));
    let s = verify_suite(seed);
    let mut text = String::new();
    for c in &s.checks {
        text.push_str(&format!(
            "{} {}: {} ({}, {:.2}s)\n",
            if c.pass { "PASS" } else { "FAIL" },
            c.module,
            c.invariant,
            c.detail,
            c.seconds
        ));
    }
    text.push_str(&format!("total {:.2}s", s.seconds));
    Ok(Outcome {
        value: serde_json::to_value(&s)?,
        pass: s.pass,
        text,
    })
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::GenDataset(a) => gen_dataset_cmd(a, cli.seed),
        Command::TrainLasso(a) => train_lasso_cmd(a),
        Command::ShallowLearn(a) => shallow_cmd(a),
        Command::FlippedSolve(a) => flipped_cmd(a),
        Command::ClockVerify(a) => clock_cmd(a, cli.seed),
        Command::KitaevVerify(a) => kitaev_cmd(a, cli.seed),
        Command::Evolve(a) => evolve_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::VerifySuite => suite_cmd(cli.seed),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_VALIDATION,
            };
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return EXIT_VALIDATION;
        }
        // a global pool may already exist when called from tests
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match dispatch(&cli) {
        Ok(o) => {
            let mut stdout = std::io::stdout().lock();
            let _ = if cli.json {
                writeln!(stdout, "{}", serde_json::to_string(&o.value).unwrap_or_default())
            } else {
                writeln!(stdout, "{}", o.text)
            };
            if o.pass {
                EXIT_OK
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_INTERNAL
            }
        }
    }
}

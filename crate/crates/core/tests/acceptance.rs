//! Acceptance criteria 1 to 10. Runs without the libtest harness so that each criterion
//! prints exactly one PASS/FAIL line; the process fails if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use obslearn::circuit::{BqpBranch, DispatcherSpec};
use obslearn::clockham::{build_childs_weighted, unary_embedding, verify_perfect_transfer, TRANSFER_TIME};
use obslearn::concepts::{
    gen_dataset, BasisSpec, Concept, ConceptSpec, HamiltonianSource, InputDistribution, LabelNoise, ShallowTemplate,
};
use obslearn::harness::{run_experiment, run_experiment_with_data, ConceptDescriptor, ExperimentConfig, LearnerConfig, PassTarget};
use obslearn::kitaev::{build_kitaev, decision_observable, verify_ground};
use obslearn::learners::lasso::{lasso_train, LassoConfig, StepRule};
use obslearn::learners::shallow::{all_stabilizer_probes, shallow_learn, shallow_probe_count, stabilizer_expectation, stabilizer_pauli, Probe, ShallowLearnConfig};
use obslearn::learners::unitary::{unitary_param_learn, UnitaryLearnConfig};
use obslearn::learners::{flipped_solve, sample_complexity, EpsBudget};
use obslearn::pauli::{enumerate_local_paulis, pauli_expectation, Geometry};
use obslearn::rng::stream_rng;
use obslearn::spectral::{eigh, evolve};
use obslearn::{BitString, Circuit, Pauli, PauliObservable, PauliString, StateVector, C64};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn random_state(n: usize, rng: &mut ChaCha8Rng) -> StateVector {
    let amps = (0..1usize << n)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    StateVector::normalized(amps).unwrap()
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Fidelity of `e^{iHπ}|ψ⟩|0⟩` with `U|ψ⟩|k⟩` for the weighted clock, against a direct
/// circuit simulation of `U|ψ⟩`.
fn c1_perfect_transfer() -> Outcome {
    let start = Instant::now();
    let mut worst = 1.0f64;
    for i in 0..200u64 {
        let mut rng = stream_rng(1, i);
        let n = rng.random_range(1..=3);
        let k = rng.random_range(1..=6);
        let c = Circuit::random(n, k, &mut rng).unwrap();
        let psi = random_state(n, &mut rng);
        let h = build_childs_weighted(&c).unwrap();
        let kk = k + 1;
        let mut v = vec![C64::new(0.0, 0.0); h.dim()];
        for (w, a) in psi.amplitudes().iter().enumerate() {
            v[w * kk] = *a;
        }
        let out = evolve(h.operator(), &v, TRANSFER_TIME).unwrap();
        let want = c.run(&psi).unwrap();
        let overlap: C64 = want
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(w, a)| a.conj() * out[w * kk + k])
            .sum();
        worst = worst.min(overlap.norm_sqr());
        // the library's own report must agree
        let rep = verify_perfect_transfer(&c, &psi, 1e-9).unwrap();
        if (rep.fidelity - overlap.norm_sqr()).abs() > 1e-9 {
            return (false, format!("circuit {i}: report fidelity {} vs direct {}", rep.fidelity, overlap.norm_sqr()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst >= 1.0 - 1e-9 && secs < 30.0,
        format!("min fidelity {worst:.3e} deficit {:.3e} over 200 circuits, {secs:.1}s (limit 30s)", 1.0 - worst),
    )
}

fn c2_unary_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    let mut leak = 0.0f64;
    let mut cases = 0;
    for n in 1..=2usize {
        for k in 1..=4usize {
            for rep in 0..3u64 {
                let mut rng = stream_rng(2, (n * 100 + k * 10) as u64 + rep);
                let c = Circuit::random(n, k, &mut rng).unwrap();
                let h = build_childs_weighted(&c).unwrap();
                let (op, legal) = unary_embedding(&h).unwrap();
                let psi = random_state(n, &mut rng);
                let v0 = h.initial_state(&psi).unwrap();
                for &t in &[0.37, 1.1, TRANSFER_TIME] {
                    let a = evolve(h.operator(), &v0, t).unwrap();
                    let full = evolve(&op, &legal.embed(&v0).unwrap(), t).unwrap();
                    let b = legal.project(&full).unwrap();
                    let d: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
                    worst = worst.max(norm(&d));
                    leak = leak.max((1.0 - norm(&b).powi(2)).abs());
                    cases += 1;
                }
            }
        }
    }
    (
        worst <= 1e-8 && leak <= 1e-8,
        format!("{cases} evolutions, max |abstract - unary| {worst:.3e}, max leakage {leak:.3e} (tol 1e-8)"),
    )
}

fn c3_kitaev() -> Outcome {
    let mut instances = 0;
    let mut worst_e = 0.0f64;
    let mut worst_term = 0.0f64;
    let mut worst_min = 0.0f64;
    let mut min_gap = f64::INFINITY;
    for n in 1..=3usize {
        for t in 1..=4usize {
            for rep in 0..3u64 {
                let mut rng = stream_rng(3, (n * 100 + t * 10) as u64 + rep);
                let c = Circuit::random(n, t, &mut rng).unwrap();
                for xi in 0..(1usize << n) {
                    let x = BitString::from_index(xi, n);
                    let h = build_kitaev(&c, &x).unwrap();
                    let psi = h.history_state().unwrap();
                    let r = verify_ground(&h, &psi, 1e-9).unwrap();
                    for term in h.terms() {
                        worst_term = worst_term.max(norm(&term.matvec(&psi).unwrap()));
                    }
                    worst_e = worst_e.max(r.energy.abs());
                    worst_min = worst_min.max((r.energy - r.min_eigenvalue).abs());
                    min_gap = min_gap.min(r.gap);
                    instances += 1;
                }
            }
        }
    }
    let structural = worst_e <= 1e-9 && worst_term <= 1e-9 && worst_min <= 1e-9 && min_gap > 0.0;

    // decision observable on the dense ground state against the circuit's final ⟨Z₁⟩
    let mut checked = 0;
    let mut sign_ok = 0;
    let mut strong = 0;
    let mut strong_ok = 0;
    for i in 0..50u64 {
        let mut rng = stream_rng(33, i);
        let n = rng.random_range(1..=3);
        let t = rng.random_range(1..=4);
        let c = Circuit::random(n, t, &mut rng).unwrap();
        let x = BitString::from_index(rng.random_range(0..1usize << n), n);
        let h = build_kitaev(&c, &x).unwrap();
        let eig = eigh(h.operator()).unwrap();
        let g: Vec<C64> = eig.vectors.column(0).iter().copied().collect();
        let value = decision_observable(h.n_work(), h.t_gates()).expectation(&g).unwrap();
        let padded = h.circuit().unwrap();
        let out = padded.run_basis(&BitString::from_index(xi_padded(&x, h.n_work()), h.n_work())).unwrap();
        let z1 = pauli_expectation(&out, &PauliString::single(h.n_work(), 0, Pauli::Z)).unwrap();
        if z1.abs() > 1e-9 {
            checked += 1;
            if value.signum() == z1.signum() {
                sign_ok += 1;
            }
        }
        if z1.abs() >= 1.0 / 3.0 {
            strong += 1;
            if value.abs() >= 0.05 && value.signum() == z1.signum() {
                strong_ok += 1;
            }
        }
    }
    (
        structural && sign_ok == checked && strong_ok == strong,
        format!(
            "{instances} instances: max energy {worst_e:.2e}, max |H_j psi| {worst_term:.2e}, max |E - E_min| {worst_min:.2e}, min gap {min_gap:.3e}; decision sign {sign_ok}/{checked}, strong {strong_ok}/{strong}"
        ),
    )
}

/// `x` padded with ancilla zeros to the Kitaev work register.
fn xi_padded(x: &BitString, n_work: usize) -> usize {
    x.to_index() << (n_work - x.len())
}

fn hard_cfg(eps: f64, noise: LabelNoise, target: PassTarget, reps: usize) -> ExperimentConfig {
    ExperimentConfig {
        schema_version: 1,
        name: Some("hard instance".into()),
        concept: ConceptDescriptor::HardInstance {
            n_work: 2,
            gates: 6,
            circuit_seed: 4,
        },
        distribution: InputDistribution::Uniform,
        n_train: None,
        n_test: 2000,
        noise,
        features: Default::default(),
        learner: LearnerConfig::Lasso {
            b: None,
            eps3: Some(0.02),
            step: StepRule::Fixed,
            max_iters: None,
            tol_residual: 0.0,
        },
        eps,
        delta: 0.1,
        target,
        budget: None,
        repetitions: reps,
        seed: 44,
    }
}

fn c4_lasso_learning() -> Outcome {
    let start = Instant::now();
    let exact = run_experiment(&hard_cfg(0.05, LabelNoise::Exact, PassTarget::Eps, 20)).unwrap();
    let p = &exact.payload;
    let n_expected = sample_complexity(1.0, p.m, 0.1, 0.02).unwrap();
    let eps = 0.05;
    let budget = EpsBudget {
        eps1_prime: 0.2 * eps,
        eps2: 0.05,
        eps3: 0.02,
    };
    let noisy = run_experiment(&hard_cfg(eps, LabelNoise::Uniform { eps2: 0.05 }, PassTarget::Composite, 20)).unwrap();
    let q = &noisy.payload;
    let secs = start.elapsed().as_secs_f64();
    let target_ok = (q.runs[0].target - budget.composite()).abs() < 1e-15;
    let worst = |r: &obslearn::harness::ReportPayload| r.runs.iter().map(|x| x.test_mse).fold(0.0, f64::max);
    (
        p.m <= 31 && p.n_train == n_expected && p.pass_count >= 18 && q.pass_count >= 18 && target_ok && secs < 60.0,
        format!(
            "m = {}, N = {}; exact {}/20 within 0.05 (worst {:.2e}); noisy {}/20 within {:.4} (worst {:.2e}); {secs:.1}s (limit 60s)",
            p.m,
            p.n_train,
            p.pass_count,
            worst(p),
            q.pass_count,
            budget.composite(),
            worst(q)
        ),
    )
}

fn mse(g: &[f64], c: &[f64], y2: f64, w: &[f64]) -> f64 {
    let m = w.len();
    let mut q = 0.0;
    for i in 0..m {
        for j in 0..m {
            q += w[i] * g[i * m + j] * w[j];
        }
    }
    q - 2.0 * w.iter().zip(c).map(|(a, b)| a * b).sum::<f64>() + y2
}

/// Grid over the first `m − 1` coordinates at step 1e−3, exact 1-d minimization in the last.
fn grid_min(g: &[f64], c: &[f64], y2: f64, m: usize, b: f64) -> f64 {
    let step = 1e-3;
    let steps = (b / step).round() as i64;
    let last = |w: &mut Vec<f64>, used: f64| {
        let r = (b - used).max(0.0);
        let l = m - 1;
        let glll = g[l * m + l];
        let lin: f64 = c[l] - (0..l).map(|i| g[l * m + i] * w[i]).sum::<f64>();
        w[l] = if glll > 0.0 { (lin / glll).clamp(-r, r) } else if lin > 0.0 { r } else { -r };
        mse(g, c, y2, w)
    };
    let mut best = f64::INFINITY;
    let mut w = vec![0.0; m];
    match m {
        1 => best = best.min(last(&mut w, 0.0)),
        2 => {
            for i in -steps..=steps {
                w[0] = i as f64 * step;
                let used = w[0].abs();
                best = best.min(last(&mut w, used));
            }
        }
        _ => {
            for i in -steps..=steps {
                w[0] = i as f64 * step;
                let rem = steps - i.abs();
                for j in -rem..=rem {
                    w[1] = j as f64 * step;
                    let used = w[0].abs() + w[1].abs();
                    best = best.min(last(&mut w, used));
                }
            }
        }
    }
    best
}

fn c5_lasso_certificate() -> Outcome {
    let eps3 = 0.01;
    let mut worst = 0.0f64;
    let mut all_ok = true;
    for i in 0..50u64 {
        let mut rng = stream_rng(5, i);
        let m = rng.random_range(1..=3);
        let n = rng.random_range(1..=20);
        let b = rng.random_range(0.2..1.5);
        let phi: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..=1.5)).collect();
        let nf = n as f64;
        let mut g = vec![0.0; m * m];
        let mut c = vec![0.0; m];
        for (row, yl) in phi.iter().zip(&y) {
            for a in 0..m {
                c[a] += row[a] * yl / nf;
                for bb in 0..m {
                    g[a * m + bb] += row[a] * row[bb] / nf;
                }
            }
        }
        let y2 = y.iter().map(|v| v * v).sum::<f64>() / nf;
        let cfg = LassoConfig {
            b,
            eps3,
            ..LassoConfig::default()
        };
        let model = lasso_train(&phi, &y, &cfg).unwrap();
        let grid = grid_min(&g, &c, y2, m, b);
        let diff = model.diagnostics.train_mse - grid;
        worst = worst.max(diff.abs());
        all_ok &= diff.abs() <= eps3 / 2.0 && model.l1_norm() <= b + 1e-12;
    }
    (all_ok, format!("50 instances, max |lasso - grid| {worst:.3e} (tol eps3/2 = {})", eps3 / 2.0))
}

fn c6_sample_complexity() -> Outcome {
    let n = sample_complexity(1.0, 4, 0.1, 0.4).unwrap();
    // second path: log base 2 and a different operation order
    let ln80 = 80f64.log2() * std::f64::consts::LN_2;
    let alt = ((2.0 * ln80).sqrt() * 2.0 / (0.4 * 0.4)).ceil() as u64;
    // N grows as B^4
    let n2 = sample_complexity(2.0, 4, 0.1, 0.4).unwrap();
    let alt2 = ((2.0 * ln80).sqrt() * 32.0 / (0.4 * 0.4)).ceil() as u64;
    (
        n == 38 && alt == 38 && n2 == alt2,
        format!("sample_complexity(1, 4, 0.1, 0.4) = {n}, independent recomputation = {alt}; at B = 2: {n2} vs {alt2}"),
    )
}

fn mc_probes(o: &PauliObservable, n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Probe> {
    // single-shot values: pick a term with probability |α_i|/‖α‖₁ and measure it once
    let l1 = o.l1_norm();
    let terms: Vec<(f64, &PauliString)> = o.terms().collect();
    (0..count)
        .map(|_| {
            let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..6)).collect();
            let mut u = rng.random::<f64>() * l1;
            let mut pick = terms.len() - 1;
            for (i, (a, _)) in terms.iter().enumerate() {
                if u < a.abs() {
                    pick = i;
                    break;
                }
                u -= a.abs();
            }
            let (a, p) = terms[pick];
            let e = stabilizer_pauli(p, &labels);
            let outcome = if rng.random::<f64>() < (1.0 + e) / 2.0 { 1.0 } else { -1.0 };
            Probe {
                labels,
                value: l1 * a.signum() * outcome,
            }
        })
        .collect()
}

fn max_err(o: &PauliObservable, raw: &[(PauliString, f64)]) -> f64 {
    raw.iter()
        .map(|(q, e)| {
            let want = o.basis().iter().position(|p| p == q).map(|i| o.alpha()[i]).unwrap_or(0.0);
            (e - want).abs()
        })
        .fold(0.0, f64::max)
}

fn c7_shallow() -> Outcome {
    // exact recovery under full enumeration, including weight-3 terms the search does not cover
    let mut exact_err = 0.0f64;
    for n in 1..=3usize {
        let mut rng = stream_rng(7, n as u64);
        let all = enumerate_local_paulis(n, n, Geometry::AllSubsets).unwrap();
        let alpha: Vec<f64> = all.iter().map(|_| rng.random_range(-1.0..=1.0) / all.len() as f64).collect();
        let o = PauliObservable::new(all.clone(), alpha).unwrap();
        let probes: Vec<Probe> = all_stabilizer_probes(n)
            .into_iter()
            .map(|l| Probe { value: stabilizer_expectation(&o, &l).unwrap(), labels: l })
            .collect();
        let k = n.min(2);
        let m = shallow_learn(&probes, &ShallowLearnConfig { k_max: k, threshold: 0.0, ..Default::default() }).unwrap();
        exact_err = exact_err.max(max_err(&o, &m.raw));
    }

    // Monte Carlo at the prescribed probe count, n = 4
    let n = 4;
    let mut mc = Vec::new();
    let observables = [
        (1usize, PauliObservable::new(vec!["IIZI".parse().unwrap(), "IIXI".parse().unwrap()], vec![0.6, -0.3]).unwrap()),
        (
            2usize,
            PauliObservable::new(vec!["IXIZ".parse().unwrap(), "IYII".parse().unwrap(), "IIIZ".parse().unwrap()], vec![0.5, -0.3, 0.2]).unwrap(),
        ),
    ];
    for (k, o) in &observables {
        let count = shallow_probe_count(n, *k, 0.1, 0.05).unwrap() as usize;
        let mut ok = 0;
        for seed in 0..20u64 {
            let mut rng = stream_rng(70 + *k as u64, seed);
            let probes = mc_probes(o, n, count, &mut rng);
            let m = shallow_learn(&probes, &ShallowLearnConfig { k_max: *k, threshold: 0.0, ..Default::default() }).unwrap();
            if max_err(o, &m.raw) <= 0.1 {
                ok += 1;
            }
        }
        mc.push((*k, count, ok));
    }

    // probes needed for 90% success at each ε, read off the empirical error quantile
    let (_, o) = &observables[1];
    let checkpoints: Vec<usize> = (0..=16).map(|j| (1000.0 * 2f64.powf(j as f64 / 2.0)).round() as usize).collect();
    let nmax = *checkpoints.last().unwrap();
    let mut errs = vec![Vec::new(); checkpoints.len()];
    for seed in 0..20u64 {
        let mut rng = stream_rng(77, seed);
        let probes = mc_probes(o, n, nmax, &mut rng);
        for (ci, &nc) in checkpoints.iter().enumerate() {
            let m = shallow_learn(&probes[..nc], &ShallowLearnConfig { k_max: 2, threshold: 0.0, ..Default::default() }).unwrap();
            errs[ci].push(max_err(o, &m.raw));
        }
    }
    let q90: Vec<f64> = errs
        .iter_mut()
        .map(|e| {
            e.sort_by(|a, b| a.total_cmp(b));
            e[17]
        })
        .collect();
    // log-log regression of the 90% error quantile on N, inverted to N(ε)
    let xs: Vec<f64> = checkpoints.iter().map(|&c| (c as f64).ln()).collect();
    let ys: Vec<f64> = q90.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let beta = sxy / sxx;
    let needed: Vec<f64> = [0.05f64, 0.1, 0.2].iter().map(|e| ((e.ln() - my) / beta + mx).exp()).collect();
    let lx: Vec<f64> = [0.05f64, 0.1, 0.2].iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = needed.iter().map(|n| n.ln()).collect();
    let mlx = lx.iter().sum::<f64>() / 3.0;
    let mly = ly.iter().sum::<f64>() / 3.0;
    let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mlx) * (y - mly)).sum::<f64>() / lx.iter().map(|x| (x - mlx).powi(2)).sum::<f64>();
    let in_range = needed[0] <= nmax as f64 && needed[2] >= checkpoints[0] as f64;

    let pass = exact_err < 1e-12 && mc.iter().all(|(_, _, ok)| *ok >= 18) && (slope + 2.0).abs() <= 0.3 && in_range;
    (
        pass,
        format!(
            "exact max error {exact_err:.1e}; MC {}; N(eps) for eps = 0.05, 0.1, 0.2: {:.0}, {:.0}, {:.0}, slope {slope:.3} (want -2 +- 0.3)",
            mc.iter().map(|(k, c, ok)| format!("k={k} N={c} {ok}/20")).collect::<Vec<_>>().join(", "),
            needed[0],
            needed[1],
            needed[2]
        ),
    )
}

fn c8_unitary_pipeline() -> Outcome {
    let bqp = Circuit::random(3, 8, &mut stream_rng(8, 0)).unwrap();
    let spec = ConceptSpec::UnitaryParam {
        dispatcher: DispatcherSpec::shallow(3, BqpBranch::OnInput(bqp)).unwrap(),
        template: ShallowTemplate::single_layer(3, [Pauli::X, Pauli::Y]),
        alpha: vec![0.9, -0.6],
        base_obs: "ZII".parse().unwrap(),
    };
    let ConceptSpec::UnitaryParam { dispatcher, .. } = &spec else { unreachable!() };
    let dist = InputDistribution::Dispatcher { bqp_law: None, joint: None };
    let small = gen_dataset(&spec, &dist, 1000, LabelNoise::Exact, 81).unwrap();
    let frac = small.samples.iter().filter(|s| s.x.bits().unwrap().get(0)).count() as f64 / 1000.0;

    let cfg = UnitaryLearnConfig::default();
    let n_train = 2 * shallow_probe_count(3, cfg.shallow.k_max, cfg.shallow.eps, cfg.shallow.delta).unwrap() as usize;
    let train = gen_dataset(&spec, &dist, n_train, LabelNoise::Exact, 82).unwrap();
    let pairs: Vec<(BitString, f64)> = train.samples.iter().map(|s| (s.x.bits().unwrap().clone(), s.y)).collect();
    let pred = unitary_param_learn(&pairs, dispatcher, &cfg).unwrap();
    let concept = Concept::build(&spec).unwrap();
    let test = gen_dataset(&spec, &dist, 2000, LabelNoise::Exact, 83).unwrap();
    let (mut s_all, mut s_one, mut n_one) = (0.0, 0.0, 0usize);
    for s in &test.samples {
        let x = s.x.bits().unwrap();
        let e = (pred.predict(x).unwrap() - concept.eval(x).unwrap()).powi(2);
        s_all += e;
        if x.get(0) {
            s_one += e;
            n_one += 1;
        }
    }
    let mse_all = s_all / test.len() as f64;
    let mse_one = s_one / n_one as f64;
    (
        mse_all <= 0.05 && mse_one <= 0.05 && (frac - 0.5).abs() <= 0.05,
        format!("N = {n_train}: test MSE {mse_all:.3e}, on x1 = 1 half {mse_one:.3e} (tol 0.05); x1 = 1 fraction at N = 1000: {frac:.3}"),
    )
}

fn c9_flipped() -> Outcome {
    let mut rng = stream_rng(9, 0);
    let c = Circuit::random(2, 5, &mut rng).unwrap();
    let x: BitString = "10".parse().unwrap();
    let basis = BasisSpec { k: 2, geometry: Geometry::LineContiguous };
    let spec = ConceptSpec::Flipped {
        x_fixed: x.clone(),
        hamiltonian: HamiltonianSource::ChildsClock { circuit: c.clone() },
        tau: TRANSFER_TIME,
        basis,
    };
    let concept = Concept::build(&spec).unwrap();
    let m = concept.n_input();
    let ds = gen_dataset(&spec, &InputDistribution::UniformReal, 2 * m, LabelNoise::Exact, 90).unwrap();
    let rows: Vec<(Vec<f64>, f64)> = ds.samples.iter().map(|s| (s.x.real().unwrap().to_vec(), s.y)).collect();
    let sol = flipped_solve(&rows, 0.0).unwrap();
    // oracle: perfect transfer puts U|x⟩ on the work register at t = π
    let out = c.run_basis(&x).unwrap();
    let truth: Vec<f64> = concept.basis().iter().map(|p| pauli_expectation(&out, p).unwrap()).collect();
    let rec = sol.v.iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut pred = 0.0f64;
    for _ in 0..100 {
        let a: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let want: f64 = a.iter().zip(&truth).map(|(x, y)| x * y).sum();
        pred = pred.max((sol.predict(&a).unwrap() - want).abs());
    }
    (
        rec <= 1e-8 && pred <= 1e-8 && sol.rank == m,
        format!("m = {m}, rank {}: max |v - <P>| {rec:.2e}, max prediction error {pred:.2e} (tol 1e-8)", sol.rank),
    )
}

fn c10_reproducibility() -> Outcome {
    let mut cfg = hard_cfg(0.05, LabelNoise::Shots { shots: 200 }, PassTarget::Eps, 2);
    cfg.n_train = Some(3000);
    cfg.n_test = 500;
    let (a, da) = run_experiment_with_data(&cfg).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let (b, db) = pool.install(|| run_experiment_with_data(&cfg).unwrap());
    let same_payload = a.payload_json().unwrap() == b.payload_json().unwrap();
    let same_data = da
        .iter()
        .zip(&db)
        .all(|(x, y)| x.train.to_jsonl().unwrap() == y.train.to_jsonl().unwrap() && x.test.to_jsonl().unwrap() == y.test.to_jsonl().unwrap());
    let mut u = cfg.clone();
    u.concept = ConceptDescriptor::RandomUnitary {
        n_s: 3,
        letters: [Pauli::X, Pauli::Y],
        base_obs: "ZII".parse().unwrap(),
        bqp_gates: 6,
        angle: 1.0,
        alpha_seed: 3,
    };
    u.distribution = InputDistribution::Dispatcher { bqp_law: None, joint: None };
    u.learner = LearnerConfig::Unitary { cfg: UnitaryLearnConfig::default() };
    u.noise = LabelNoise::Shots { shots: 1 };
    u.n_train = Some(4000);
    let (c, dc) = run_experiment_with_data(&u).unwrap();
    let (d, dd) = pool.install(|| run_experiment_with_data(&u).unwrap());
    let same_u = c.payload_json().unwrap() == d.payload_json().unwrap() && dc[0].train.to_jsonl().unwrap() == dd[0].train.to_jsonl().unwrap();
    (
        same_payload && same_data && same_u,
        format!(
            "lasso payload identical: {same_payload}, datasets identical: {same_data}, unitary pipeline identical: {same_u} (default pool vs 1 thread)"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("perfect state transfer", c1_perfect_transfer),
        ("unary clock equivalence", c2_unary_equivalence),
        ("kitaev ground state", c3_kitaev),
        ("lasso learning condition", c4_lasso_learning),
        ("lasso certificate vs grid", c5_lasso_certificate),
        ("sample complexity arithmetic", c6_sample_complexity),
        ("shallow observable learner", c7_shallow),
        ("dispatcher pipeline", c8_unitary_pipeline),
        ("flipped linear solve", c9_flipped),
        ("reproducibility", c10_reproducibility),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|p| id.ends_with(p.as_str()) || name.contains(p.as_str())) {
            continue;
        }
        let t = Instant::now();
        let (pass, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(o) => o,
            Err(e) => (
                false,
                format!(
                    "panicked: {}",
                    e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
                ),
            ),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{id:>12} {}: {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

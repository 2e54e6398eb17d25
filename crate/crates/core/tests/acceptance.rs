//! Acceptance suite. Runs every criterion at its stated tolerance and
//! prints one PASS/FAIL line per criterion; exits non-zero if any fails.
//!
//! Run alone with `cargo test -p rleceo-core --test acceptance`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng as _;

use rleceo::cop::{
    eps_compare, relaxed_violation, BudgetCounter, Evaluation, EpsilonVector, Ranked,
};
use rleceo::dqn::{
    loss_and_grad, sgd_step, td_target, NetworkParams, Shape,
};
use rleceo::env::{
    compute_reward, epsilon_from_action, EnvConfig, EpsilonBase, MetaEnv, RewardState,
    RewardVariant, Transition,
};
use rleceo::features::StateVector;
use rleceo::harness::{
    evaluate_checkpoint, evaluate_policy, leave_one_out, summarize, train, untrained_params,
    ExperimentConfig, Policy, RunRecord,
};
use rleceo::lshade::{Lshade, LshadeConfig};
use rleceo::problems::registry_lookup;
use rleceo::seed::{self, Rng};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- 1

fn exponential_mapping() -> Outcome {
    let mut rng = seed::rng(1);
    let mut worst_mono = 0usize;
    for _ in 0..1000 {
        let delta = 10f64.powf(rng.random_range(-6.0..0.0));
        let m = rng.random_range(1..8);
        let base: Vec<f64> = (0..m)
            .map(|_| delta * 10f64.powf(rng.random_range(0.0..8.0)))
            .collect();
        let eb = EpsilonBase::new(base.clone(), delta).map_err(|e| e.to_string())?;
        let lo = epsilon_from_action(0.0, &eb);
        let hi = epsilon_from_action(1.0, &eb);
        ensure(lo.as_slice().iter().all(|&v| v == delta), || {
            format!("eps(0) = {:?}, expected {delta}", lo.as_slice())
        })?;
        ensure(hi.as_slice() == base.as_slice(), || {
            format!("eps(1) = {:?}, expected {base:?}", hi.as_slice())
        })?;
        let a: f64 = rng.random();
        let b: f64 = rng.random();
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let (ea, eb2) = (epsilon_from_action(a, &eb), epsilon_from_action(b, &eb));
        if ea.as_slice().iter().zip(eb2.as_slice()).any(|(x, y)| x > y) {
            worst_mono += 1;
        }
    }
    ensure(worst_mono == 0, || format!("{worst_mono} monotonicity violations"))?;
    Ok("1000 draws, endpoints exact, monotone".into())
}

// ---------------------------------------------------------------- 2

/// Direct statement of the comparison rule: each constraint's violation
/// counts only where it exceeds its threshold, and lower total relaxed
/// violation wins before the objective is consulted.
fn oracle_compare(a: &Evaluation, b: &Evaluation, eps: &[f64]) -> Ordering {
    let relaxed = |e: &Evaluation| {
        let mut total = 0.0;
        for (i, &g) in e.g().iter().enumerate() {
            let v = g.max(0.0);
            if v > eps[i] {
                total += v;
            }
        }
        for (j, &h) in e.h().iter().enumerate() {
            let v = h.abs();
            if v > eps[e.g().len() + j] {
                total += v;
            }
        }
        total
    };
    let (ra, rb) = (relaxed(a), relaxed(b));
    if ra < rb {
        Ordering::Less
    } else if ra > rb {
        Ordering::Greater
    } else if a.f() < b.f() {
        Ordering::Less
    } else if a.f() > b.f() {
        Ordering::Greater
    } else {
        Ordering::Equal
    }
}

fn feasibility_first(a: &Evaluation, b: &Evaluation) -> Ordering {
    let nu = |e: &Evaluation| {
        e.g().iter().map(|g| g.max(0.0)).sum::<f64>() + e.h().iter().map(|h| h.abs()).sum::<f64>()
    };
    let (na, nb) = (nu(a), nu(b));
    match (na == 0.0, nb == 0.0) {
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (true, true) => a.f().partial_cmp(&b.f()).unwrap(),
        (false, false) => na
            .partial_cmp(&nb)
            .unwrap()
            .then(a.f().partial_cmp(&b.f()).unwrap()),
    }
}

fn comparison_rule() -> Outcome {
    let mut rng = seed::rng(2);
    let draw = |rng: &mut Rng, p: usize, q: usize| {
        // a coarse grid in half the draws makes exact ties and boundary
        // violations likely
        let coarse = rng.random_bool(0.5);
        let mut v = |lo: f64, hi: f64| {
            let x: f64 = rng.random_range(lo..hi);
            if coarse { (x * 2.0).round() / 2.0 } else { x }
        };
        let f = v(-5.0, 5.0);
        let g = (0..p).map(|_| v(-2.0, 2.0)).collect();
        let h = (0..q).map(|_| v(-2.0, 2.0)).collect();
        Evaluation::new(f, g, h).unwrap()
    };
    let mut mismatches = 0usize;
    let mut zero_mismatches = 0usize;
    for _ in 0..100_000 {
        let (p, q) = (rng.random_range(0..4), rng.random_range(0..3));
        let a = draw(&mut rng, p, q);
        let b = draw(&mut rng, p, q);
        let eps: Vec<f64> = (0..p + q)
            .map(|_| {
                if rng.random_bool(0.3) {
                    (rng.random_range(0.0..2.0f64) * 2.0).round() / 2.0
                } else {
                    rng.random_range(0.0..2.0)
                }
            })
            .collect();
        let ev = EpsilonVector::new(eps.clone()).unwrap();
        let rank = |e: &Evaluation, ev: &EpsilonVector| {
            Ranked::new(e.f(), relaxed_violation(e, ev).unwrap())
        };
        if eps_compare(rank(&a, &ev), rank(&b, &ev)) != oracle_compare(&a, &b, &eps) {
            mismatches += 1;
        }
        let z = EpsilonVector::zeros(p + q);
        if eps_compare(rank(&a, &z), rank(&b, &z)) != feasibility_first(&a, &b) {
            zero_mismatches += 1;
        }
    }
    ensure(mismatches == 0 && zero_mismatches == 0, || {
        format!("{mismatches} mismatches with thresholds, {zero_mismatches} at zero")
    })?;
    Ok("1e5 pairs agree with the oracle and with feasibility-first at zero".into())
}

// ---------------------------------------------------------------- 3

fn reward_bounds() -> Outcome {
    let worked = compute_reward(
        &RewardState {
            f_gbest_0: 10.0,
            f_gbest_prev: 4.0,
            f_gbest_now: 4.0,
            f_agentbest: 1.0,
            nu_top5_0: 2.0,
            nu_top5_prev: 2.0,
            nu_top5_now: 1.0,
        },
        RewardVariant::Full,
    );
    ensure(worked.r1 == 0.0 && (worked.r2 - 0.5).abs() < 1e-12 && (worked.gamma - 0.5).abs() < 1e-12, || {
        format!("worked example inputs produced {worked:?}")
    })?;
    ensure((worked.r - 0.25).abs() < 1e-12, || format!("worked example r = {}", worked.r))?;

    let problems = ["cec12", "cec14", "synthetic/rastrigin-ring/1", "synthetic/griewank-plane/2"];
    let variants = [RewardVariant::Full, RewardVariant::R1, RewardVariant::R2, RewardVariant::R1r2];
    let mut rng = seed::rng(3);
    let mut count = 0usize;
    for ep in 0..100 {
        let p = registry_lookup(problems[ep % 4], 10).unwrap();
        let cfg = EnvConfig {
            reward: variants[(ep / 4) % 4],
            ..EnvConfig::new(500)
        };
        let known = if rng.random_bool(0.5) { f64::INFINITY } else { rng.random_range(-1e3..1e5) };
        let mut env = MetaEnv::reset(p, ep as u64, cfg, known).map_err(|e| e.to_string())?;
        while !env.is_terminal() {
            let (tr, _) = env.step(rng.random_range(0..11)).map_err(|e| e.to_string())?;
            ensure((0.0..=1.0).contains(&tr.r), || format!("episode {ep}: reward {}", tr.r))?;
            count += 1;
        }
    }
    Ok(format!("worked example r = 0.25; {count} rewards over 100 episodes in [0, 1]"))
}

// ---------------------------------------------------------------- 4

fn random_transition(rng: &mut Rng) -> Transition {
    let mut state = || {
        let mut s: [f64; 10] = std::array::from_fn(|_| rng.random());
        s[4] = rng.random_range(-2.0..2.0);
        StateVector(s)
    };
    let (s, s_next) = (state(), state());
    Transition {
        s,
        a: rng.random_range(0..11),
        r: rng.random(),
        s_next,
        terminal: rng.random_bool(0.25),
    }
}

/// Squared TD error from forward passes alone, targets held fixed.
fn forward_loss(batch: &[Transition], ys: &[f64], theta: &NetworkParams) -> f64 {
    batch
        .iter()
        .zip(ys)
        .map(|(tr, y)| (y - theta.forward(tr.s.as_slice()).unwrap()[tr.a]).powi(2))
        .sum::<f64>()
        / batch.len() as f64
}

fn gradient_check() -> Outcome {
    let shape = Shape::new(10, 64, 11);
    let h = 1e-5;
    let mut rng = seed::rng(4);
    let mut worst: f64 = 0.0;
    for draw in 0..100 {
        let mut online = NetworkParams::glorot(shape, &mut rng);
        let target = NetworkParams::glorot(shape, &mut rng);
        online.b1.iter_mut().for_each(|b| *b = rng.random_range(-0.3..0.3));
        online.b2.iter_mut().for_each(|b| *b = rng.random_range(-0.3..0.3));
        let batch: Vec<Transition> = (0..4).map(|_| random_transition(&mut rng)).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let ys: Vec<f64> = batch
            .iter()
            .map(|tr| td_target(tr, &online, &target, 1.0).unwrap())
            .collect();
        let (_, grad) = loss_and_grad(&refs, &online, &target, 1.0).map_err(|e| e.to_string())?;
        let mut flat = online.to_flat();
        for (k, g) in grad.to_flat().into_iter().enumerate() {
            let orig = flat[k];
            flat[k] = orig + h;
            let lp = forward_loss(&batch, &ys, &NetworkParams::from_flat(shape, &flat).unwrap());
            flat[k] = orig - h;
            let lm = forward_loss(&batch, &ys, &NetworkParams::from_flat(shape, &flat).unwrap());
            flat[k] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let scale = g.abs().max(numeric.abs());
            let rel = if scale == 0.0 { 0.0 } else { (g - numeric).abs() / scale.max(1e-8) };
            ensure(rel < 1e-4, || {
                format!("draw {draw}, parameter {k}: analytic {g:e}, numeric {numeric:e}")
            })?;
            worst = worst.max(rel);
        }
    }
    Ok(format!("100 draws x {} parameters, max relative error {worst:.2e}", shape.n_params()))
}

// ---------------------------------------------------------------- 5

fn single_transition_overfit() -> Outcome {
    let shape = Shape::new(10, 64, 11);
    let mut rng = seed::rng(5);
    let mut online = NetworkParams::glorot(shape, &mut rng);
    let target = online.clone();
    let mut tr = random_transition(&mut rng);
    tr.terminal = true;
    tr.r = 0.9;
    let mut loss = f64::INFINITY;
    for step in 0..2000 {
        let (l, g) = loss_and_grad(&[&tr], &online, &target, 1.0).map_err(|e| e.to_string())?;
        loss = l;
        if loss < 1e-4 {
            return Ok(format!("loss {loss:.2e} after {step} steps"));
        }
        sgd_step(&mut online, &g, 1e-2);
    }
    Err(format!("loss still {loss:e} after 2000 steps"))
}

// ---------------------------------------------------------------- 6

fn sphere_sanity() -> Outcome {
    let p = registry_lookup("sphere", 10).unwrap();
    let eps = EpsilonVector::zeros(0);
    let mut finals = Vec::new();
    for s in 0..10u64 {
        let mut rng = seed::rng(seed::derive(0, "sphere-sanity", &[s]));
        let mut budget = BudgetCounter::new(10_000);
        let mut opt = Lshade::init(LshadeConfig::default(), p.as_ref(), &eps, &mut budget, &mut rng)
            .map_err(|e| e.to_string())?;
        while !budget.exhausted() {
            opt.generation_step(p.as_ref(), &eps, &mut budget, &mut rng)
                .map_err(|e| e.to_string())?;
        }
        finals.push(opt.pop.best().f());
    }
    let worst = finals.iter().copied().fold(0.0, f64::max);
    ensure(finals.iter().all(|&f| f <= 1e-2), || format!("final f per seed: {finals:?}"))?;
    Ok(format!("10/10 seeds, worst final f {worst:.2e}"))
}

// ---------------------------------------------------------------- 7 and 8

struct Comparison {
    rows: Vec<(String, f64, f64, f64)>,
}

fn mean_sco(records: &[RunRecord]) -> BTreeMap<String, f64> {
    summarize(records)
        .into_iter()
        .map(|r| (r.problem, r.mean))
        .collect()
}

fn trained_vs_baselines() -> Result<Comparison, String> {
    let train_set: Vec<String> = [
        "synthetic/sphere-linear/1",
        "synthetic/rosenbrock-cubic/2",
        "synthetic/rastrigin-ring/3",
        "synthetic/ackley-ellipsoid/4",
        "synthetic/griewank-plane/5",
    ]
    .map(String::from)
    .to_vec();
    let test_set: Vec<String> = [
        "cec12",
        "cec14",
        "synthetic/schwefel-band/6",
        "synthetic/rastrigin-ring/7",
    ]
    .map(String::from)
    .to_vec();
    let cfg = ExperimentConfig {
        problems: train_set.clone(),
        dims: vec![10],
        runs: 10,
        seed: 0,
        ..ExperimentConfig::default()
    };
    let out = train(&cfg, &train_set).map_err(|e| e.to_string())?;
    let trained = evaluate_checkpoint(&cfg, &out.checkpoint, &test_set, "trained")
        .map_err(|e| e.to_string())?;
    let untrained_policy = Policy::Agent {
        params: Arc::new(untrained_params(&cfg).map_err(|e| e.to_string())?),
        mask: false,
    };
    let untrained = evaluate_policy(&cfg, &test_set, "untrained", &untrained_policy, &BTreeMap::new())
        .map_err(|e| e.to_string())?;
    let scheduled = evaluate_policy(&cfg, &test_set, "scheduled", &Policy::Scheduled(cfg.cp), &BTreeMap::new())
        .map_err(|e| e.to_string())?;
    for recs in [&trained, &untrained, &scheduled] {
        let seeds: Vec<u64> = recs.iter().map(|r| r.seed).collect();
        let ref_seeds: Vec<u64> = trained.iter().map(|r| r.seed).collect();
        ensure(seeds == ref_seeds, || "runs are not paired".into())?;
        ensure(
            recs.iter().all(|r| r.generations.last().map(|g| g.fes) == Some(500)),
            || "budget parity violated".into(),
        )?;
    }
    let (t, u, s) = (mean_sco(&trained), mean_sco(&untrained), mean_sco(&scheduled));
    Ok(Comparison {
        rows: test_set
            .iter()
            .map(|p| (p.clone(), t[p], u[p], s[p]))
            .collect(),
    })
}

fn describe(c: &Comparison) -> String {
    c.rows
        .iter()
        .map(|(p, t, u, s)| format!("{p}: trained {t:.7e}, untrained {u:.7e}, scheduled {s:.7e}"))
        .collect::<Vec<_>>()
        .join("; ")
}

fn trained_vs_untrained(c: &Comparison) -> Outcome {
    let wins = c.rows.iter().filter(|(_, t, u, _)| t <= u).count();
    let msg = format!("trained <= untrained on {wins}/4 ({})", describe(c));
    if wins >= 3 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn trained_vs_scheduled(c: &Comparison) -> Outcome {
    let wins = c.rows.iter().filter(|(_, t, _, s)| t < s).count();
    let msg = format!("trained < scheduled on {wins}/4");
    if wins >= 2 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---------------------------------------------------------------- 9

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn loo_determinism() -> Outcome {
    let cfg = ExperimentConfig::from_toml_str(
        r#"
problems = ["synthetic/sphere-linear/11", "synthetic/ackley-ellipsoid/12", "synthetic/schwefel-band/13"]
dims = [10]
runs = 3
seed = 42

[train]
max_epoch = 5
batch_size = 16
"#,
    )
    .map_err(|e| e.to_string())?;
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    leave_one_out(&cfg).and_then(|o| o.write(a.path())).map_err(|e| e.to_string())?;
    leave_one_out(&cfg).and_then(|o| o.write(b.path())).map_err(|e| e.to_string())?;
    let (fa, fb) = (read_dir_bytes(a.path()), read_dir_bytes(b.path()));
    ensure(fa.keys().eq(fb.keys()), || "different file sets".into())?;
    for (name, bytes) in &fa {
        ensure(fb[name] == *bytes, || format!("{name} differs between runs"))?;
    }
    Ok(format!("{} files byte-identical across two runs", fa.len()))
}

// ---------------------------------------------------------------- 10

fn episode_accounting() -> Outcome {
    let problems = ["cec12", "cec14", "sphere", "synthetic/rosenbrock-cubic/3"];
    let mut episodes = 0;
    for name in problems {
        let p = registry_lookup(name, 10).unwrap();
        for s in 0..25u64 {
            let mut env = MetaEnv::reset(p.clone(), s, EnvConfig::new(500), f64::INFINITY)
                .map_err(|e| e.to_string())?;
            let mut steps = 0;
            while !env.is_terminal() {
                env.step((s as usize + steps) % 11).map_err(|e| e.to_string())?;
                steps += 1;
            }
            ensure(steps == 9 && env.fes() == 500, || {
                format!("{name} seed {s}: {steps} steps, fes {}", env.fes())
            })?;
            episodes += 1;
        }
    }
    Ok(format!("{episodes} episodes, each 9 meta-steps ending at fes = 500"))
}

// ----------------------------------------------------------------

fn report(id: u32, title: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let (ok, detail) = match result {
        Ok(d) if elapsed <= limit => (true, d),
        Ok(d) => (false, format!("{d}; took {elapsed:.1?}, limit {limit:?}")),
        Err(d) => (false, d),
    };
    println!(
        "criterion {id:>2} [{}] {title} ({elapsed:.2?}): {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

fn main() -> ExitCode {
    // honour `cargo test -- --list` and similar harness probes
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let secs = Duration::from_secs;
    let mut results = vec![
        report(1, "exponential threshold mapping", secs(1), exponential_mapping),
        report(2, "comparison rule oracle", secs(5), comparison_rule),
        report(3, "reward bounds and worked example", secs(60), reward_bounds),
        report(4, "gradient check", secs(30), gradient_check),
        report(5, "single-transition overfit", secs(10), single_transition_overfit),
        report(6, "optimizer sanity on sphere", secs(30), sphere_sanity),
    ];
    let start = Instant::now();
    let comparison = trained_vs_baselines();
    let shared = start.elapsed();
    match comparison {
        Ok(c) => {
            results.push(report(7, "trained vs untrained", secs(20 * 60) - shared, || {
                trained_vs_untrained(&c)
            }));
            results.push(report(8, "trained vs scheduled", secs(20 * 60) - shared, || {
                trained_vs_scheduled(&c)
            }));
        }
        Err(e) => {
            for (id, title) in [(7, "trained vs untrained"), (8, "trained vs scheduled")] {
                results.push(report(id, title, secs(0), || Err(e.clone())));
            }
        }
    }
    println!("criteria 7-8 shared training and evaluation time: {shared:.2?}");
    results.push(report(9, "leave-one-out determinism", secs(600), loo_determinism));
    results.push(report(10, "episode accounting", secs(60), episode_accounting));

    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

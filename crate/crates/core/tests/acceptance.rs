//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line to
//! the real stderr (bypassing the test harness's capture) and then asserts,
//! except criterion 6, whose verdict is an experimental result and is only
//! reported.
//!
//! Criteria 5 and 6 share one 20-run sweep: five seeds of SAC and CGAR-SAC
//! (K = 10) on both environments at the default 30k-step schedule.

mod common;

use std::io::Write as _;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use cgar_core::agent::AgentState;
use cgar_core::cgar::{cgar_select, redistribute, CgarParams};
use cgar_core::config::{Algo, TrainConfig};
use cgar_core::distill::{self, DistillConfig, Variant};
use cgar_core::distributions::softmax;
use cgar_core::envs::EnvName;
use cgar_core::harness::{run_sweep, run_to_dir, run_training, NullSink, RunRecord};
use cgar_core::nn::Activation;
use cgar_core::replay::{ReplayBuffer, Transition};
use cgar_core::seeded_rng;
use common::*;
use rand::Rng as _;

const SEEDS: u64 = 5;

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("[acceptance] criterion {criterion} {verdict}: {name}: {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
}

#[test]
fn criterion_1_gradient_oracle() {
    let start = Instant::now();
    let cases = all_gradient_cases(1);
    let elapsed = start.elapsed();
    let worst = |what: &str| {
        cases
            .iter()
            .filter(|c| c.what == what)
            .map(|c| c.rel_err)
            .fold(0.0, f64::max)
    };
    let max = cases.iter().map(|c| c.rel_err).fold(0.0, f64::max);
    let pass = cases.len() >= 100 && max < 1e-4 && elapsed < Duration::from_secs(60);
    let detail = format!(
        "{} cases, max rel err {max:.2e} (mlp {:.1e}, critic {:.1e}, actor {:.1e}, alpha {:.1e}), {elapsed:.1?}",
        cases.len(),
        worst("mlp"),
        worst("critic loss"),
        worst("actor loss"),
        worst("alpha loss"),
    );
    report(1, "gradients vs central differences", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_2_squashed_density() {
    let params = [(0.0, 0.0), (0.5, -0.5), (-1.0, -1.0), (0.3, 0.5), (1.5, -2.0)];
    let integral_err = params
        .iter()
        .map(|&(m, s)| (density_integral(m, s) - 1.0).abs())
        .fold(0.0, f64::max);
    let mut rng = seeded_rng(2);
    let bin_err = DENSITY_POINTS
        .iter()
        .map(|&(m, s, a)| {
            let (mc, quad) = bin_mass(m, s, a, 0.02, 10_000_000, &mut rng);
            (mc - quad).abs()
        })
        .fold(0.0, f64::max);
    let pass = integral_err < 1e-2 && bin_err < 1e-3;
    let detail = format!("max |integral - 1| {integral_err:.2e}, max bin-mass error {bin_err:.2e} at 5 points (1e7 samples each)");
    report(2, "squashed-Gaussian density", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_3_sampler_suite() {
    let start = Instant::now();
    let mut rng = seeded_rng(3);
    let (mut norm_err, mut shift_err) = (0.0f64, 0.0f64);
    let mut monotone = true;
    let mut improvement = true;
    for _ in 0..10_000 {
        let k = rng.random_range(1..32);
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let q: Vec<f64> = (0..k).map(|_| rng.random_range(-scale..scale)).collect();
        let p = softmax(&q).unwrap();
        norm_err = norm_err.max((p.probs().iter().sum::<f64>() - 1.0).abs());
        let shift = rng.random_range(-1e3..1e3);
        let shifted: Vec<f64> = q.iter().map(|x| x + shift).collect();
        let s = softmax(&shifted).unwrap();
        shift_err = p.probs().iter().zip(s.probs()).map(|(a, b)| (a - b).abs()).fold(shift_err, f64::max);
        // Strict order wherever f64 can resolve it: the lower probability
        // has not underflowed and the gap is well above rounding.
        for i in 0..k {
            for j in 0..k {
                let (pi, pj) = (p.probs()[i], p.probs()[j]);
                let resolvable = pj > 1e-300 && q[i] - q[j] > 1e-9 * q[i].abs().max(q[j].abs()).max(1.0);
                if q[i] > q[j] && (pi < pj || (resolvable && pi <= pj)) {
                    monotone = false;
                }
            }
        }
        let t = rng.random_range(0.1..10.0);
        let pt = redistribute(&q, t).unwrap();
        let mean = q.iter().sum::<f64>() / k as f64;
        let expected: f64 = pt.probs().iter().zip(&q).map(|(p, q)| p * q).sum();
        if expected < mean - 1e-12 * scale {
            improvement = false;
        }
    }
    let mut members = true;
    for seed in 0..200 {
        let mut r = seeded_rng(seed);
        let agent = smooth_agent(&mut r, 3, 2, 0.0);
        let state = normals(&mut r, 3);
        let dist = agent.policy(&state).unwrap();
        let params = CgarParams { k: 1 + (seed as usize % 12), ..CgarParams::default() };
        let (action, c) = cgar_select(&agent, &dist, &state, params, &mut r).unwrap();
        members &= c.actions.contains(&action) && c.chosen_index < c.k();
    }
    let elapsed = start.elapsed();
    let pass = norm_err <= 1e-12
        && shift_err <= 1e-12
        && monotone
        && improvement
        && members
        && elapsed < Duration::from_secs(60);
    let detail = format!(
        "normalization {norm_err:.1e}, shift {shift_err:.1e}, monotone {monotone}, expected-Q improvement over 1e4 vectors {improvement}, membership {members}, {elapsed:.1?}"
    );
    report(3, "CGAR sampler", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_4_single_candidate_degeneracy() {
    let sac = TrainConfig {
        n_train: 5000,
        seed: 4,
        ..TrainConfig::default()
    };
    let cgar = TrainConfig {
        algo: Algo::CgarSac,
        k: 1,
        ..sac.clone()
    };
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("sac"), dir.path().join("cgar"));
    run_to_dir(&sac, &a).unwrap();
    run_to_dir(&cgar, &b).unwrap();
    let read = |p: &std::path::Path| std::fs::read(p.join("metrics.csv")).unwrap();
    let (ma, mb) = (read(&a), read(&b));
    let (ca, _) = AgentState::load_checkpoint(&a.join("agent.ckpt")).unwrap();
    let (cb, _) = AgentState::load_checkpoint(&b.join("agent.ckpt")).unwrap();
    let pass = ma == mb && ca == cb;
    let detail = format!(
        "5k-step pendulum, metrics.csv {} bytes each, identical files {}, identical final agents {}",
        ma.len(),
        ma == mb,
        ca == cb
    );
    report(4, "K=1 CGAR-SAC equals SAC", pass, &detail);
    assert!(pass, "{detail}");
}

struct SweepResult {
    records: Vec<RunRecord>,
    per_run: Duration,
}

fn sweep() -> &'static SweepResult {
    static SWEEP: OnceLock<SweepResult> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let mut configs = Vec::new();
        for env in [EnvName::Pendulum, EnvName::Pointmass] {
            for algo in [Algo::Sac, Algo::CgarSac] {
                for seed in 0..SEEDS {
                    configs.push(TrainConfig {
                        algo,
                        env,
                        seed,
                        ..TrainConfig::default()
                    });
                }
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
        let start = Instant::now();
        let records: Vec<RunRecord> = run_sweep(&configs, dir.path(), jobs)
            .into_iter()
            .map(|r| r.unwrap())
            .collect();
        let per_run = start.elapsed() * jobs.min(configs.len()) as u32 / configs.len() as u32;
        SweepResult { records, per_run }
    })
}

fn group(algo: Algo, env: EnvName) -> Vec<&'static RunRecord> {
    sweep()
        .records
        .iter()
        .filter(|r| r.config.algo == algo && r.config.env == env)
        .collect()
}

#[test]
fn criterion_5_sac_pendulum_baseline() {
    let runs = group(Algo::Sac, EnvName::Pendulum);
    let finals: Vec<f64> = runs
        .iter()
        .map(|r| {
            let cut = 2 * r.config.n_train / 3;
            let tail: Vec<f64> = r.evals.iter().filter(|e| e.step > cut).map(|e| e.mean_return).collect();
            tail.iter().sum::<f64>() / tail.len() as f64
        })
        .collect();
    let good = finals.iter().filter(|&&f| f >= -250.0).count();
    let per_run = sweep().per_run;
    let pass = runs.len() == SEEDS as usize
        && runs.iter().all(|r| r.is_completed())
        && good >= 3
        && per_run < Duration::from_secs(15 * 60);
    let shown: Vec<String> = finals.iter().map(|f| format!("{f:.1}")).collect();
    let detail = format!(
        "final-third mean eval return per seed [{}], {good}/5 at or above -250, about {per_run:.0?} per run",
        shown.join(", ")
    );
    report(5, "SAC pendulum baseline", pass, &detail);
    assert!(pass, "{detail}");
}

/// Mean and sample standard deviation.
fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[test]
fn criterion_6_cgar_not_worse_than_sac() {
    let mut lines = Vec::new();
    let mut not_worse = true;
    let mut strictly_better = false;
    for env in [EnvName::Pendulum, EnvName::Pointmass] {
        let avg = |algo| -> Vec<f64> {
            group(algo, env).iter().map(|r| r.average_return().unwrap()).collect()
        };
        let (sac, cgar) = (avg(Algo::Sac), avg(Algo::CgarSac));
        let ((ms, ss), (mc, sc)) = (mean_sd(&sac), mean_sd(&cgar));
        let pooled_se = ((ss * ss + sc * sc) / SEEDS as f64).sqrt();
        not_worse &= mc >= ms - pooled_se;
        strictly_better |= mc > ms;
        lines.push(format!("{env}: cgar {mc:.2} vs sac {ms:.2} (pooled SE {pooled_se:.2})"));
    }
    let pass = not_worse && strictly_better;
    let detail = lines.join("; ");
    report(6, "CGAR-SAC (K=10) vs SAC, training-averaged return", pass, &detail);
    // The direction of the comparison is an experimental outcome, reported
    // above either way. What must hold is that the experiment itself ran.
    let runs = &sweep().records;
    assert_eq!(runs.len(), 4 * SEEDS as usize);
    assert!(runs.iter().all(|r| r.is_completed() && r.average_return().is_some_and(f64::is_finite)));
}

#[test]
fn criterion_7_distillation_teacher_leads() {
    let start = Instant::now();
    let data = distill::generate_dataset(
        distill::DEFAULT_PER_CLASS,
        distill::DEFAULT_CLASSES,
        distill::DEFAULT_SPREAD,
        0,
    )
    .unwrap();
    let config = DistillConfig::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for variant in [Variant::Ce, Variant::Mse] {
        let runs: Vec<_> = (0..SEEDS)
            .map(|s| distill::train_pair(&data, variant, &config, s).unwrap())
            .collect();
        let mean = |v: fn(&distill::DistillHistory) -> &Vec<f64>, e: usize| {
            runs.iter().map(|h| v(h)[e]).sum::<f64>() / SEEDS as f64
        };
        let gaps: Vec<f64> = (1..=5).map(|e| mean(|h| &h.acc_m1, e) - mean(|h| &h.acc_m2, e)).collect();
        pass &= gaps.iter().all(|&g| g >= 0.0);
        let shown: Vec<String> = gaps.iter().map(|g| format!("{g:+.3}")).collect();
        parts.push(format!("{variant} teacher-minus-student epochs 1-5 [{}]", shown.join(", ")));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(120);
    let detail = format!("{}; {elapsed:.1?}", parts.join("; "));
    report(7, "distillation teacher lead", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_8_determinism_and_plumbing() {
    let mut checks = Vec::new();

    let mut identical = true;
    for algo in [Algo::Sac, Algo::CgarSac] {
        let config = TrainConfig {
            algo,
            env: EnvName::Pointmass,
            n_init: 300,
            n_train: 1000,
            eval_interval: 250,
            ..TrainConfig::default()
        };
        let a = run_training(&config, &mut NullSink).unwrap();
        let b = run_training(&config, &mut NullSink).unwrap();
        identical &= a.record == b.record && a.agent == b.agent;
    }
    checks.push(("identical RunRecords", identical));

    let mut fifo = ReplayBuffer::new(7).unwrap();
    for i in 0..45 {
        fifo.push(Transition {
            state: vec![0.0],
            action: vec![0.0],
            reward: i as f64,
            next_state: vec![0.0],
            done: false,
        });
    }
    let order: Vec<f64> = fifo.iter_ordered().map(|t| t.reward).collect();
    let mut rng = seeded_rng(8);
    let sampled_live = fifo.sample_batch(7, &mut rng).unwrap().iter().all(|t| t.reward >= 38.0);
    checks.push(("replay FIFO", order == (38..45).map(f64::from).collect::<Vec<_>>() && sampled_live));

    let n = 10_000;
    let mut buf = ReplayBuffer::new(n).unwrap();
    for _ in 0..n {
        buf.push(Transition {
            state: vec![0.0],
            action: vec![0.0],
            reward: 0.0,
            next_state: vec![0.0],
            done: false,
        });
    }
    let mut counts = vec![0usize; n];
    for _ in 0..1000 {
        for i in buf.sample_indices(256, &mut rng).unwrap() {
            counts[i] += 1;
        }
    }
    let expected = 256_000.0 / n as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let df = (n - 1) as f64;
    checks.push(("replay uniformity (chi-square)", (chi2 - df).abs() < 4.0 * (2.0 * df).sqrt()));

    let mut agent = AgentState::new(3, 1, &[8], Activation::Relu, 1.0, &mut seeded_rng(9)).unwrap();
    agent.target1.params_mut().iter_mut().for_each(|p| *p = 0.0);
    agent.critic1.params_mut().iter_mut().for_each(|p| *p = 1.0);
    let tau = 0.005;
    let mut polyak_err = 0.0f64;
    for step in 1..=1000 {
        agent.polyak_update(tau);
        let gap = (1.0 - tau).powi(step);
        polyak_err = agent.target1.params().iter().map(|t| ((1.0 - t) - gap).abs()).fold(polyak_err, f64::max);
    }
    checks.push(("Polyak (1 - tau)^n", polyak_err < 1e-10));

    let pass = checks.iter().all(|(_, ok)| *ok);
    let detail = checks
        .iter()
        .map(|(name, ok)| format!("{name} {}", if *ok { "ok" } else { "failed" }))
        .collect::<Vec<_>>()
        .join(", ")
        + &format!(" (chi2 {chi2:.0} on {df:.0} df, Polyak max error {polyak_err:.1e})");
    report(8, "determinism and plumbing", pass, &detail);
    assert!(pass, "{detail}");
}

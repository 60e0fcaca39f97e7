#![allow(dead_code)]

use cgar_core::agent::AgentState;
use cgar_core::nn::{Activation, Mlp};
use cgar_core::replay::{Batch, Transition};
use cgar_core::Rng;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

pub const FD_STEP: f64 = 1e-5;

pub fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normals(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}

/// `|a - b| / max(|a|, |b|)` over whole vectors, with an absolute floor so
/// that two near-zero gradients compare equal.
pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(analytic).max(norm(numeric)).max(1e-8)
}

/// Central differences of `f` with respect to every entry of `x`.
pub fn numeric_grad(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + FD_STEP;
            let up = f(&probe);
            probe[i] = x[i] - FD_STEP;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

pub fn random_mlp(rng: &mut Rng, sizes: &[usize], act: Activation) -> Mlp {
    let mut m = Mlp::new(sizes, act, rng).unwrap();
    // Fresh biases are small; spread them so relu units sit away from kinks.
    for p in m.params_mut() {
        *p += 0.3 * normal(rng);
    }
    m
}

/// A small agent with tanh hidden layers, so every loss is smooth.
pub fn smooth_agent(rng: &mut Rng, obs: usize, act: usize, log_alpha: f64) -> AgentState {
    let hidden = [rng.random_range(2..6), rng.random_range(2..6)];
    let actor = random_mlp(rng, &[obs, hidden[0], hidden[1], 2 * act], Activation::Tanh);
    let c1 = random_mlp(rng, &[obs + act, hidden[0], 1], Activation::Tanh);
    let c2 = random_mlp(rng, &[obs + act, hidden[0], 1], Activation::Tanh);
    let mut agent = AgentState::from_networks(actor, c1, c2, log_alpha).unwrap();
    for t in [agent.target1.params_mut(), agent.target2.params_mut()] {
        for p in t {
            *p += 0.1 * normal(rng);
        }
    }
    agent
}

pub fn random_batch(rng: &mut Rng, n: usize, obs: usize, act: usize) -> Batch {
    let transitions: Vec<Transition> = (0..n)
        .map(|_| Transition {
            state: normals(rng, obs),
            action: (0..act).map(|_| rng.random_range(-0.99..0.99)).collect(),
            reward: normal(rng),
            next_state: normals(rng, obs),
            done: rng.random_bool(0.2),
        })
        .collect();
    Batch::from_transitions(&transitions).unwrap()
}

/// One finite-difference comparison: which quantity and its relative error.
pub struct GradCase {
    pub what: &'static str,
    pub rel_err: f64,
}

pub fn mlp_case(rng: &mut Rng) -> GradCase {
    let act = if rng.random_bool(0.5) { Activation::Tanh } else { Activation::Relu };
    let depth = rng.random_range(2..5);
    let sizes: Vec<usize> = (0..depth).map(|_| rng.random_range(1..6)).collect();
    let net = random_mlp(rng, &sizes, act);
    let input = normals(rng, sizes[0]);
    let upstream = normals(rng, *sizes.last().unwrap());
    let back = net.backward(&input, &upstream).unwrap();
    let dot = |m: &Mlp, x: &[f64]| m.forward(x).unwrap().iter().zip(&upstream).map(|(o, u)| o * u).sum::<f64>();
    let params = net.params().to_vec();
    let num_params = numeric_grad(&params, |p| dot(&Mlp::from_flat(&sizes, act, p.to_vec()).unwrap(), &input));
    let num_input = numeric_grad(&input, |x| dot(&net, x));
    let mut analytic = back.params.as_slice().to_vec();
    analytic.extend_from_slice(&back.input);
    let mut numeric = num_params;
    numeric.extend(num_input);
    GradCase {
        what: "mlp",
        rel_err: rel_err(&analytic, &numeric),
    }
}

fn with_params(agent: &AgentState, which: usize, p: &[f64]) -> AgentState {
    let mut a = agent.clone();
    let net = match which {
        0 => &mut a.actor,
        1 => &mut a.critic1,
        _ => &mut a.critic2,
    };
    net.params_mut().copy_from_slice(p);
    a
}

pub fn critic_case(rng: &mut Rng) -> GradCase {
    let (obs, act) = (rng.random_range(1..4), rng.random_range(1..3));
    let log_alpha = rng.random_range(-2.0..0.5);
    let agent = smooth_agent(rng, obs, act, log_alpha);
    let n = rng.random_range(1..6);
    let batch = random_batch(rng, n, obs, act);
    let noise = normals(rng, n * act);
    let out = agent.critic_loss_with_noise(&batch, &noise, 0.9).unwrap();
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for c in 0..2 {
        let params = if c == 0 { agent.critic1.params() } else { agent.critic2.params() }.to_vec();
        analytic.extend_from_slice(out.grads[c].as_slice());
        numeric.extend(numeric_grad(&params, |p| {
            with_params(&agent, c + 1, p).critic_loss_with_noise(&batch, &noise, 0.9).unwrap().loss
        }));
    }
    GradCase {
        what: "critic loss",
        rel_err: rel_err(&analytic, &numeric),
    }
}

pub fn actor_case(rng: &mut Rng) -> GradCase {
    let (obs, act) = (rng.random_range(1..4), rng.random_range(1..3));
    let log_alpha = rng.random_range(-2.0..0.5);
    let agent = smooth_agent(rng, obs, act, log_alpha);
    let n = rng.random_range(1..6);
    let batch = random_batch(rng, n, obs, act);
    let noise = normals(rng, n * act);
    let out = agent.actor_loss_with_noise(&batch, &noise).unwrap();
    let numeric = numeric_grad(agent.actor.params(), |p| {
        with_params(&agent, 0, p).actor_loss_with_noise(&batch, &noise).unwrap().loss
    });
    GradCase {
        what: "actor loss",
        rel_err: rel_err(out.grads.as_slice(), &numeric),
    }
}

pub fn alpha_case(rng: &mut Rng) -> GradCase {
    let (obs, act) = (rng.random_range(1..4), rng.random_range(1..3));
    let log_alpha = rng.random_range(-2.0..0.5);
    let agent = smooth_agent(rng, obs, act, log_alpha);
    let n = rng.random_range(1..6);
    let batch = random_batch(rng, n, obs, act);
    let noise = normals(rng, n * act);
    let h = rng.random_range(-3.0..1.0);
    let out = agent.alpha_loss_with_noise(&batch, &noise, h).unwrap();
    let numeric = numeric_grad(&[agent.log_alpha], |la| {
        let mut a = agent.clone();
        a.log_alpha = la[0];
        a.alpha_loss_with_noise(&batch, &noise, h).unwrap().loss
    });
    GradCase {
        what: "alpha loss",
        rel_err: rel_err(&[out.grad], &numeric),
    }
}

/// 40 network cases and 25 of each loss.
pub fn all_gradient_cases(seed: u64) -> Vec<GradCase> {
    let mut rng = cgar_core::seeded_rng(seed);
    let mut cases = Vec::new();
    for _ in 0..40 {
        cases.push(mlp_case(&mut rng));
    }
    for _ in 0..25 {
        cases.push(critic_case(&mut rng));
        cases.push(actor_case(&mut rng));
        cases.push(alpha_case(&mut rng));
    }
    cases
}

fn squashed_density(mean: f64, log_std: f64, a: f64) -> f64 {
    use cgar_core::distributions::PolicyDistribution;
    let d = PolicyDistribution::new(vec![mean], vec![log_std]).unwrap();
    d.log_prob_squashed(&[a.atanh()]).unwrap().exp()
}

/// Trapezoid rule for the density of `tanh(u)` over (-1, 1).
pub fn density_integral(mean: f64, log_std: f64) -> f64 {
    let n = 400_000;
    let edge = 1e-12;
    let (lo, hi) = (-1.0 + edge, 1.0 - edge);
    let h = (hi - lo) / n as f64;
    let f = |i: usize| squashed_density(mean, log_std, lo + i as f64 * h);
    let inner: f64 = (1..n).map(f).sum();
    h * (inner + 0.5 * (f(0) + f(n)))
}

/// Probability mass of the action bin `[a - w/2, a + w/2]` two ways: the
/// empirical frequency among `samples` draws, and Simpson quadrature of the
/// analytic density.
pub fn bin_mass(mean: f64, log_std: f64, a: f64, width: f64, samples: usize, rng: &mut Rng) -> (f64, f64) {
    let (lo, hi) = (a - width / 2.0, a + width / 2.0);
    let sigma = log_std.exp();
    let hits = (0..samples)
        .filter(|_| {
            let x = (mean + sigma * normal(rng)).tanh();
            x >= lo && x < hi
        })
        .count();
    let m = 200;
    let h = (hi - lo) / m as f64;
    let quad = (0..=m)
        .map(|i| {
            let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            w * squashed_density(mean, log_std, lo + i as f64 * h)
        })
        .sum::<f64>()
        * h
        / 3.0;
    (hits as f64 / samples as f64, quad)
}

/// The five (mean, log_std, action) points used by the density oracle.
pub const DENSITY_POINTS: [(f64, f64, f64); 5] = [
    (0.5, -0.5, 0.833_654_607_012_155_4), // tanh(1.2)
    (0.0, 0.0, 0.0),
    (0.0, 0.0, 0.9),
    (-1.0, -1.0, -0.7),
    (0.3, 0.5, -0.4),
];

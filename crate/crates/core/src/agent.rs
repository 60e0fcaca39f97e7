//! Soft actor-critic learner.
//!
//! The actor maps a state to `mean || log_std` of a tanh-squashed diagonal
//! Gaussian. Two critics map `state || action` to a scalar Q; each has a
//! Polyak-averaged target copy. The temperature is `alpha = exp(log_alpha)`.
//!
//! Every loss has a `*_with_noise` variant taking the standard-normal noise
//! matrix (`batch x action_dim`) explicitly; the RNG variants draw that noise
//! and delegate. Gradient checks use the explicit form.

use std::io::{Read, Write};
use std::path::Path;

use crate::adam::AdamState;
use crate::config::TrainConfig;
use crate::distributions::{
    clamp_log_std, gaussian_log_density, log_one_minus_tanh_sq, standard_normal_vec, PolicyDistribution,
    LOG_STD_MAX, LOG_STD_MIN,
};
use crate::error::check_dim;
use crate::nn::{Activation, ForwardCache, GradBuffer, Mlp};
use crate::replay::{Batch, ReplayBuffer};
use crate::{Error, Result, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub target1: Mlp,
    pub target2: Mlp,
    pub log_alpha: f64,
    pub actor_opt: AdamState,
    pub critic1_opt: AdamState,
    pub critic2_opt: AdamState,
    pub alpha_opt: AdamState,
}

#[derive(Debug, Clone)]
pub struct CriticLoss {
    /// Sum of both critics' losses.
    pub loss: f64,
    pub losses: [f64; 2],
    pub grads: [GradBuffer; 2],
    /// Bootstrapped regression targets, one per batch row.
    pub targets: Vec<f64>,
    /// Batch mean of `min(Q1, Q2)` at the stored actions.
    pub mean_q: f64,
}

#[derive(Debug, Clone)]
pub struct ActorLoss {
    pub loss: f64,
    pub grads: GradBuffer,
    pub log_probs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaLoss {
    pub loss: f64,
    /// Derivative with respect to `log_alpha`.
    pub grad: f64,
    pub mean_log_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha_loss: f64,
    pub alpha: f64,
    pub mean_q: f64,
}

/// Batched actor evaluation with reparameterized samples.
struct PolicyBatch {
    cache: ForwardCache,
    noise: Vec<f64>,
    /// Clamped log-std, row-major like `noise`.
    log_std: Vec<f64>,
    clamped: Vec<bool>,
    presquash: Vec<f64>,
    actions: Vec<f64>,
    log_probs: Vec<f64>,
}

impl AgentState {
    /// Initialises actor, critics (targets copy the critics) and optimizers.
    /// Parameter draws happen in the order actor, critic 1, critic 2.
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        activation: Activation,
        init_alpha: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        let sizes = |input: usize, output: usize| {
            let mut s = vec![input];
            s.extend_from_slice(hidden);
            s.push(output);
            s
        };
        let actor = Mlp::new(&sizes(obs_dim, 2 * act_dim), activation, rng)?;
        let critic1 = Mlp::new(&sizes(obs_dim + act_dim, 1), activation, rng)?;
        let critic2 = Mlp::new(&sizes(obs_dim + act_dim, 1), activation, rng)?;
        Self::from_networks(actor, critic1, critic2, init_alpha.ln())
    }

    pub fn from_config(config: &TrainConfig, rng: &mut Rng) -> Result<Self> {
        let spec = config.env.spec();
        Self::new(
            spec.observation_dim,
            spec.action_dim,
            &config.hidden,
            config.activation,
            config.init_alpha,
            rng,
        )
    }

    /// Assembles an agent from explicit networks with fresh optimizers.
    pub fn from_networks(actor: Mlp, critic1: Mlp, critic2: Mlp, log_alpha: f64) -> Result<Self> {
        if !actor.output_dim().is_multiple_of(2) {
            return Err(Error::Config("actor output must be mean || log_std".into()));
        }
        let act_dim = actor.output_dim() / 2;
        for critic in [&critic1, &critic2] {
            check_dim("critic input", actor.input_dim() + act_dim, critic.input_dim())?;
            check_dim("critic output", 1, critic.output_dim())?;
        }
        if critic1.layer_sizes() != critic2.layer_sizes() {
            return Err(Error::Config("twin critics must share a shape".into()));
        }
        if !log_alpha.is_finite() {
            return Err(Error::NonFinite("log_alpha"));
        }
        Ok(AgentState {
            actor_opt: AdamState::new(actor.num_params()),
            critic1_opt: AdamState::new(critic1.num_params()),
            critic2_opt: AdamState::new(critic2.num_params()),
            alpha_opt: AdamState::new(1),
            target1: critic1.clone(),
            target2: critic2.clone(),
            actor,
            critic1,
            critic2,
            log_alpha,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.actor.output_dim() / 2
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    /// Action distribution at one state.
    pub fn policy(&self, state: &[f64]) -> Result<PolicyDistribution> {
        let out = self.actor.forward(state)?;
        let d = self.act_dim();
        PolicyDistribution::new(out[..d].to_vec(), out[d..].to_vec())
    }

    /// Both online critic values at one `(state, action)`.
    pub fn q_values(&self, state: &[f64], action: &[f64]) -> Result<(f64, f64)> {
        let sa = concat_row(state, action, self.obs_dim(), self.act_dim())?;
        Ok((self.critic1.forward(&sa)?[0], self.critic2.forward(&sa)?[0]))
    }

    pub fn q_min(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        let (q1, q2) = self.q_values(state, action)?;
        Ok(q1.min(q2))
    }

    /// Batched online critic values for many actions at one state.
    pub fn q_values_at_state(&self, state: &[f64], actions: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (od, ad) = (self.obs_dim(), self.act_dim());
        check_dim("state", od, state.len())?;
        let mut sa = Vec::with_capacity(actions.len() * (od + ad));
        for a in actions {
            check_dim("action", ad, a.len())?;
            sa.extend_from_slice(state);
            sa.extend_from_slice(a);
        }
        let q1 = self.critic1.forward_batch(&sa, actions.len())?.output().to_vec();
        let q2 = self.critic2.forward_batch(&sa, actions.len())?.output().to_vec();
        Ok((q1, q2))
    }

    /// Single-sample soft value at `next_state`: target-critic min at a fresh
    /// policy sample minus `alpha * log pi`.
    pub fn value_target(&self, next_state: &[f64], rng: &mut Rng) -> Result<f64> {
        let noise = standard_normal_vec(rng, self.act_dim());
        self.value_target_with_noise(next_state, &noise)
    }

    pub fn value_target_with_noise(&self, next_state: &[f64], noise: &[f64]) -> Result<f64> {
        let dist = self.policy(next_state)?;
        let (action, presquash) = dist.sample_squashed(noise)?;
        let log_prob = dist.log_prob_squashed(&presquash)?;
        let sa = concat_row(next_state, &action, self.obs_dim(), self.act_dim())?;
        let q = self.target1.forward(&sa)?[0].min(self.target2.forward(&sa)?[0]);
        Ok(q - self.alpha() * log_prob)
    }

    fn policy_batch(&self, states: &[f64], n: usize, noise: &[f64]) -> Result<PolicyBatch> {
        let d = self.act_dim();
        check_dim("policy noise", n * d, noise.len())?;
        let cache = self.actor.forward_batch(states, n)?;
        let mut log_std = vec![0.0; n * d];
        let mut clamped = vec![false; n * d];
        let mut presquash = vec![0.0; n * d];
        let mut actions = vec![0.0; n * d];
        let mut log_probs = vec![0.0; n];
        for (i, row) in cache.output().chunks_exact(2 * d).enumerate() {
            let mut lp = 0.0;
            for j in 0..d {
                let k = i * d + j;
                let (mean, raw) = (row[j], row[d + j]);
                let s = clamp_log_std(raw);
                let u = mean + s.exp() * noise[k];
                log_std[k] = s;
                clamped[k] = !(LOG_STD_MIN..=LOG_STD_MAX).contains(&raw);
                presquash[k] = u;
                actions[k] = u.tanh();
                lp += gaussian_log_density(u, mean, s) - log_one_minus_tanh_sq(u);
            }
            log_probs[i] = lp;
        }
        let pb = PolicyBatch {
            cache,
            noise: noise.to_vec(),
            log_std,
            clamped,
            presquash,
            actions,
            log_probs,
        };
        if pb.log_probs.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("policy log-probability"));
        }
        Ok(pb)
    }

    pub fn critic_loss(&self, batch: &Batch, rng: &mut Rng, gamma: f64) -> Result<CriticLoss> {
        let noise = standard_normal_vec(rng, batch.len * self.act_dim());
        self.critic_loss_with_noise(batch, &noise, gamma)
    }

    /// `sum_c mean_i 1/2 (Q_c(s_i, a_i) - y_i)^2` with
    /// `y_i = r_i + gamma (1 - done_i) V(s'_i)` held constant.
    pub fn critic_loss_with_noise(&self, batch: &Batch, noise: &[f64], gamma: f64) -> Result<CriticLoss> {
        self.check_batch(batch)?;
        let n = batch.len;
        let (od, ad) = (self.obs_dim(), self.act_dim());
        let alpha = self.alpha();

        let next = self.policy_batch(&batch.next_states, n, noise)?;
        let next_sa = concat_rows(&batch.next_states, &next.actions, n, od, ad);
        let t1 = self.target1.forward_batch(&next_sa, n)?;
        let t2 = self.target2.forward_batch(&next_sa, n)?;
        let targets: Vec<f64> = (0..n)
            .map(|i| {
                let v = t1.output()[i].min(t2.output()[i]) - alpha * next.log_probs[i];
                let cont = if batch.dones[i] { 0.0 } else { 1.0 };
                batch.rewards[i] + gamma * cont * v
            })
            .collect();

        let sa = concat_rows(&batch.states, &batch.actions, n, od, ad);
        let mut losses = [0.0; 2];
        let mut grads = [GradBuffer::zeros_like(&self.critic1), GradBuffer::zeros_like(&self.critic2)];
        let mut qs: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for (c, critic) in [&self.critic1, &self.critic2].into_iter().enumerate() {
            let cache = critic.forward_batch(&sa, n)?;
            let diff: Vec<f64> = cache.output().iter().zip(&targets).map(|(q, y)| q - y).collect();
            losses[c] = diff.iter().map(|d| 0.5 * d * d).sum::<f64>() / n as f64;
            let upstream: Vec<f64> = diff.iter().map(|d| d / n as f64).collect();
            critic.backward_batch(&cache, &upstream, Some(&mut grads[c]))?;
            qs[c] = cache.output().to_vec();
        }
        let loss = losses[0] + losses[1];
        if !loss.is_finite() {
            return Err(Error::NonFinite("critic loss"));
        }
        let mean_q = qs[0].iter().zip(&qs[1]).map(|(a, b)| a.min(*b)).sum::<f64>() / n as f64;
        Ok(CriticLoss {
            loss,
            losses,
            grads,
            targets,
            mean_q,
        })
    }

    pub fn actor_loss(&self, batch: &Batch, rng: &mut Rng) -> Result<ActorLoss> {
        let noise = standard_normal_vec(rng, batch.len * self.act_dim());
        self.actor_loss_with_noise(batch, &noise)
    }

    /// `mean_i alpha log pi(a~_i | s_i) - min(Q1, Q2)(s_i, a~_i)` with
    /// reparameterized `a~`; gradients reach the actor only.
    pub fn actor_loss_with_noise(&self, batch: &Batch, noise: &[f64]) -> Result<ActorLoss> {
        self.check_batch(batch)?;
        let n = batch.len;
        let (od, ad) = (self.obs_dim(), self.act_dim());
        let alpha = self.alpha();
        let inv_n = 1.0 / n as f64;

        let pb = self.policy_batch(&batch.states, n, noise)?;
        let sa = concat_rows(&batch.states, &pb.actions, n, od, ad);
        let c1 = self.critic1.forward_batch(&sa, n)?;
        let c2 = self.critic2.forward_batch(&sa, n)?;
        let (q1, q2) = (c1.output(), c2.output());

        let mut loss = 0.0;
        let mut up1 = vec![0.0; n];
        let mut up2 = vec![0.0; n];
        for i in 0..n {
            loss += alpha * pb.log_probs[i] - q1[i].min(q2[i]);
            if q1[i] <= q2[i] {
                up1[i] = -inv_n;
            } else {
                up2[i] = -inv_n;
            }
        }
        loss *= inv_n;
        if !loss.is_finite() {
            return Err(Error::NonFinite("actor loss"));
        }
        let dsa1 = self.critic1.backward_batch(&c1, &up1, None)?;
        let dsa2 = self.critic2.backward_batch(&c2, &up2, None)?;

        let mean = pb.cache.output();
        let entropy_weight = alpha * inv_n;
        let mut upstream = vec![0.0; n * 2 * ad];
        for i in 0..n {
            for j in 0..ad {
                let k = i * ad + j;
                let col = i * (od + ad) + od + j;
                let dq_da = dsa1[col] + dsa2[col];
                let (u, a, s) = (pb.presquash[k], pb.actions[k], pb.log_std[k]);
                let sigma = s.exp();
                let m = mean[i * 2 * ad + j];
                let z = (u - m) / sigma;
                // d log pi / d u at fixed (mean, log_std): Gaussian part plus
                // the derivative of -log(1 - tanh^2 u), which is 2 tanh u.
                let dlogp_du = -z / sigma + 2.0 * u.tanh();
                let dl_du = dq_da * (1.0 - a * a) + entropy_weight * dlogp_du;
                let d_mean = dl_du + entropy_weight * z / sigma;
                let d_log_std = dl_du * sigma * pb.noise[k] + entropy_weight * (z * z - 1.0);
                upstream[i * 2 * ad + j] = d_mean;
                upstream[i * 2 * ad + ad + j] = if pb.clamped[k] { 0.0 } else { d_log_std };
            }
        }
        let mut grads = GradBuffer::zeros_like(&self.actor);
        self.actor.backward_batch(&pb.cache, &upstream, Some(&mut grads))?;
        Ok(ActorLoss {
            loss,
            grads,
            log_probs: pb.log_probs,
        })
    }

    pub fn alpha_loss(&self, batch: &Batch, rng: &mut Rng, target_entropy: f64) -> Result<AlphaLoss> {
        let noise = standard_normal_vec(rng, batch.len * self.act_dim());
        self.alpha_loss_with_noise(batch, &noise, target_entropy)
    }

    /// `mean_i -alpha (log pi(a~_i | s_i) + H)`, with `log pi` constant in alpha.
    pub fn alpha_loss_with_noise(&self, batch: &Batch, noise: &[f64], target_entropy: f64) -> Result<AlphaLoss> {
        self.check_batch(batch)?;
        let pb = self.policy_batch(&batch.states, batch.len, noise)?;
        let mean_log_prob = pb.log_probs.iter().sum::<f64>() / batch.len as f64;
        let loss = -self.alpha() * (mean_log_prob + target_entropy);
        if !loss.is_finite() {
            return Err(Error::NonFinite("alpha loss"));
        }
        // d(alpha)/d(log_alpha) = alpha, so the gradient equals the loss.
        Ok(AlphaLoss {
            loss,
            grad: loss,
            mean_log_prob,
        })
    }

    /// `target <- tau * online + (1 - tau) * target` for both critics.
    pub fn polyak_update(&mut self, tau: f64) {
        debug_assert!(tau > 0.0 && tau <= 1.0);
        for (target, online) in [(&mut self.target1, &self.critic1), (&mut self.target2, &self.critic2)] {
            for (t, &o) in target.params_mut().iter_mut().zip(online.params()) {
                *t = tau * o + (1.0 - tau) * *t;
            }
        }
    }

    /// Samples a minibatch and runs [`AgentState::train_step_on_batch`].
    pub fn train_step(&mut self, buffer: &ReplayBuffer, config: &TrainConfig, rng: &mut Rng) -> Result<StepMetrics> {
        let transitions = buffer.sample_batch(config.batch_size, rng)?;
        let batch = Batch::from_transitions(&transitions)?;
        self.train_step_on_batch(&batch, config, rng)
    }

    /// One Adam step each for the critics, the actor and the temperature, in
    /// that order, then the Polyak update. Each loss draws its own noise from
    /// `rng`. On error the agent is left exactly as it was.
    pub fn train_step_on_batch(&mut self, batch: &Batch, config: &TrainConfig, rng: &mut Rng) -> Result<StepMetrics> {
        let backup = self.clone();
        let result = self.train_step_inner(batch, config, rng);
        if result.is_err() {
            *self = backup;
        }
        result
    }

    fn train_step_inner(&mut self, batch: &Batch, config: &TrainConfig, rng: &mut Rng) -> Result<StepMetrics> {
        let critic = self.critic_loss(batch, rng, config.gamma)?;
        self.critic1_opt
            .step(self.critic1.params_mut(), critic.grads[0].as_slice(), config.lr_critic)?;
        self.critic2_opt
            .step(self.critic2.params_mut(), critic.grads[1].as_slice(), config.lr_critic)?;

        let actor = self.actor_loss(batch, rng)?;
        self.actor_opt
            .step(self.actor.params_mut(), actor.grads.as_slice(), config.lr_actor)?;

        let target_entropy = config.resolved_target_entropy(self.act_dim());
        let alpha = self.alpha_loss(batch, rng, target_entropy)?;
        let mut log_alpha = [self.log_alpha];
        self.alpha_opt.step(&mut log_alpha, &[alpha.grad], config.lr_alpha)?;
        self.log_alpha = log_alpha[0];

        self.polyak_update(config.tau);
        if !(self.actor.is_finite() && self.critic1.is_finite() && self.critic2.is_finite()) {
            return Err(Error::NonFinite("agent parameters after update"));
        }
        Ok(StepMetrics {
            critic_loss: critic.loss,
            actor_loss: actor.loss,
            alpha_loss: alpha.loss,
            alpha: self.alpha(),
            mean_q: critic.mean_q,
        })
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.len == 0 {
            return Err(Error::InsufficientData { needed: 1, available: 0 });
        }
        check_dim("batch observation", self.obs_dim(), batch.obs_dim)?;
        check_dim("batch action", self.act_dim(), batch.act_dim)
    }

    /// Writes a versioned little-endian binary checkpoint.
    pub fn save_checkpoint(&self, path: &Path, config_hash: u64) -> Result<()> {
        let mut buf = Vec::new();
        self.write_checkpoint(&mut buf, config_hash)
            .expect("writing to a Vec cannot fail");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    /// Reads a checkpoint; returns the agent and the stored config hash.
    pub fn load_checkpoint(path: &Path) -> Result<(Self, u64)> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_checkpoint(&mut bytes.as_slice())
    }

    pub fn write_checkpoint<W: Write>(&self, w: &mut W, config_hash: u64) -> std::io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&config_hash.to_le_bytes())?;
        w.write_all(&self.log_alpha.to_le_bytes())?;
        for net in [&self.actor, &self.critic1, &self.critic2, &self.target1, &self.target2] {
            write_mlp(w, net)?;
        }
        for opt in [&self.actor_opt, &self.critic1_opt, &self.critic2_opt, &self.alpha_opt] {
            write_adam(w, opt)?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<(Self, u64)> {
        let mut magic = [0u8; 8];
        read_exact(r, &mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::parse("checkpoint", "bad magic"));
        }
        let version = read_u32(r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::parse("checkpoint", format!("unsupported version {version}")));
        }
        let hash = read_u64(r)?;
        let log_alpha = read_f64(r)?;
        let actor = read_mlp(r)?;
        let critic1 = read_mlp(r)?;
        let critic2 = read_mlp(r)?;
        let target1 = read_mlp(r)?;
        let target2 = read_mlp(r)?;
        let mut agent = Self::from_networks(actor, critic1, critic2, log_alpha)?;
        if target1.layer_sizes() != agent.critic1.layer_sizes() || target2.layer_sizes() != agent.critic2.layer_sizes() {
            return Err(Error::parse("checkpoint", "target shape differs from critic"));
        }
        agent.target1 = target1;
        agent.target2 = target2;
        agent.actor_opt = read_adam(r, agent.actor.num_params())?;
        agent.critic1_opt = read_adam(r, agent.critic1.num_params())?;
        agent.critic2_opt = read_adam(r, agent.critic2.num_params())?;
        agent.alpha_opt = read_adam(r, 1)?;
        Ok((agent, hash))
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"CGARCKPT";
const CHECKPOINT_VERSION: u32 = 1;

fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> std::io::Result<()> {
    w.write_all(&(values.len() as u64).to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn write_mlp<W: Write>(w: &mut W, mlp: &Mlp) -> std::io::Result<()> {
    let act: u8 = match mlp.activation() {
        Activation::Relu => 0,
        Activation::Tanh => 1,
        Activation::Identity => 2,
    };
    w.write_all(&[act])?;
    w.write_all(&(mlp.layer_sizes().len() as u32).to_le_bytes())?;
    for &s in mlp.layer_sizes() {
        w.write_all(&(s as u64).to_le_bytes())?;
    }
    write_f64s(w, mlp.params())
}

fn write_adam<W: Write>(w: &mut W, opt: &AdamState) -> std::io::Result<()> {
    w.write_all(&opt.step_count().to_le_bytes())?;
    for h in [opt.beta1, opt.beta2, opt.eps] {
        w.write_all(&h.to_le_bytes())?;
    }
    write_f64s(w, opt.first_moment())?;
    write_f64s(w, opt.second_moment())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::parse("checkpoint", format!("truncated: {e}")))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, expected: usize) -> Result<Vec<f64>> {
    let len = read_u64(r)? as usize;
    if len != expected {
        return Err(Error::parse("checkpoint", format!("array of {len} values, expected {expected}")));
    }
    (0..len).map(|_| read_f64(r)).collect()
}

fn read_mlp<R: Read>(r: &mut R) -> Result<Mlp> {
    let mut act = [0u8; 1];
    read_exact(r, &mut act)?;
    let activation = match act[0] {
        0 => Activation::Relu,
        1 => Activation::Tanh,
        2 => Activation::Identity,
        other => return Err(Error::parse("checkpoint", format!("unknown activation tag {other}"))),
    };
    let depth = read_u32(r)? as usize;
    if !(2..=64).contains(&depth) {
        return Err(Error::parse("checkpoint", format!("implausible network depth {depth}")));
    }
    let sizes = (0..depth).map(|_| read_u64(r).map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
    let n = Mlp::zeros(&sizes, activation)?.num_params();
    Mlp::from_flat(&sizes, activation, read_f64s(r, n)?)
}

fn read_adam<R: Read>(r: &mut R, len: usize) -> Result<AdamState> {
    let t = read_u64(r)?;
    let beta1 = read_f64(r)?;
    let beta2 = read_f64(r)?;
    let eps = read_f64(r)?;
    let m = read_f64s(r, len)?;
    let v = read_f64s(r, len)?;
    AdamState::from_parts(m, v, t, beta1, beta2, eps)
}

fn concat_row(state: &[f64], action: &[f64], od: usize, ad: usize) -> Result<Vec<f64>> {
    check_dim("state", od, state.len())?;
    check_dim("action", ad, action.len())?;
    let mut sa = Vec::with_capacity(od + ad);
    sa.extend_from_slice(state);
    sa.extend_from_slice(action);
    Ok(sa)
}

fn concat_rows(states: &[f64], actions: &[f64], n: usize, od: usize, ad: usize) -> Vec<f64> {
    let mut sa = Vec::with_capacity(n * (od + ad));
    for i in 0..n {
        sa.extend_from_slice(&states[i * od..(i + 1) * od]);
        sa.extend_from_slice(&actions[i * ad..(i + 1) * ad]);
    }
    sa
}

//! Critic-guided action redistribution.
//!
//! Instead of executing one draw from the actor's distribution, draw `K`
//! candidates, score each with the online critic, and pick one according to
//! the softmax of those scores. Scores are raw Q values (no entropy term).
//! With `K = 1` the categorical draw is skipped, so the RNG stream matches
//! plain SAC sampling exactly.

use crate::agent::AgentState;
use crate::config::CriticChoice;
use crate::distributions::{softmax, standard_normal_vec, DiscreteDistribution, PolicyDistribution};
use crate::{Error, Result, Rng};

/// The sampled set, its scores and the redistributed probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionCandidates {
    pub actions: Vec<Vec<f64>>,
    pub presquash: Vec<Vec<f64>>,
    pub q_scores: Vec<f64>,
    pub probs: DiscreteDistribution,
    pub chosen_index: usize,
}

impl ActionCandidates {
    pub fn k(&self) -> usize {
        self.actions.len()
    }

    pub fn chosen_action(&self) -> &[f64] {
        &self.actions[self.chosen_index]
    }
}

/// `K` independent reparameterized draws; noise is consumed candidate by
/// candidate, coordinate by coordinate.
pub fn sample_action_set(dist: &PolicyDistribution, k: usize, rng: &mut Rng) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    if k == 0 {
        return Err(Error::Config("CGAR needs at least one candidate".into()));
    }
    let mut actions = Vec::with_capacity(k);
    let mut presquash = Vec::with_capacity(k);
    for _ in 0..k {
        let noise = standard_normal_vec(rng, dist.dim());
        let (a, u) = dist.sample_squashed(&noise)?;
        actions.push(a);
        presquash.push(u);
    }
    Ok((actions, presquash))
}

/// Online-critic value of each candidate at `state`.
pub fn score_actions(agent: &AgentState, state: &[f64], actions: &[Vec<f64>], scorer: CriticChoice) -> Result<Vec<f64>> {
    if actions.is_empty() {
        return Err(Error::Config("no candidate actions to score".into()));
    }
    let (q1, q2) = agent.q_values_at_state(state, actions)?;
    let scores: Vec<f64> = match scorer {
        CriticChoice::Min => q1.iter().zip(&q2).map(|(a, b)| a.min(*b)).collect(),
        CriticChoice::First => q1,
    };
    if scores.iter().any(|q| !q.is_finite()) {
        return Err(Error::NonFinite("candidate Q scores"));
    }
    Ok(scores)
}

/// `softmax(q / temperature)`.
pub fn redistribute(q_scores: &[f64], temperature: f64) -> Result<DiscreteDistribution> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::Config(format!("temperature must be positive, got {temperature}")));
    }
    if temperature == 1.0 {
        softmax(q_scores)
    } else {
        let scaled: Vec<f64> = q_scores.iter().map(|q| q / temperature).collect();
        softmax(&scaled)
    }
}

/// Settings for [`cgar_select`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgarParams {
    pub k: usize,
    pub temperature: f64,
    pub scorer: CriticChoice,
}

impl Default for CgarParams {
    fn default() -> Self {
        CgarParams {
            k: 10,
            temperature: 1.0,
            scorer: CriticChoice::Min,
        }
    }
}

/// Draws `K` candidates, scores them, redistributes, and selects one.
pub fn cgar_select(
    agent: &AgentState,
    dist: &PolicyDistribution,
    state: &[f64],
    params: CgarParams,
    rng: &mut Rng,
) -> Result<(Vec<f64>, ActionCandidates)> {
    let (actions, presquash) = sample_action_set(dist, params.k, rng)?;
    let q_scores = score_actions(agent, state, &actions, params.scorer)?;
    let probs = redistribute(&q_scores, params.temperature)?;
    let chosen_index = if params.k == 1 { 0 } else { probs.sample(rng) };
    let candidates = ActionCandidates {
        actions,
        presquash,
        q_scores,
        probs,
        chosen_index,
    };
    Ok((candidates.chosen_action().to_vec(), candidates))
}

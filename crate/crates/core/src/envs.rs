//! Toy continuous-control tasks: pendulum swing-up and a point-mass reacher.
//!
//! Both tasks take actions in `[-1, 1]^d`, emit non-positive rewards and end
//! only at their horizon.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::check_dim;
use crate::{Error, Result, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvName {
    Pendulum,
    Pointmass,
}

impl EnvName {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvName::Pendulum => "pendulum",
            EnvName::Pointmass => "pointmass",
        }
    }

    pub fn spec(self) -> EnvSpec {
        match self {
            EnvName::Pendulum => EnvSpec {
                name: self,
                observation_dim: 3,
                action_dim: 1,
                max_episode_steps: 200,
            },
            EnvName::Pointmass => EnvSpec {
                name: self,
                observation_dim: 4,
                action_dim: 2,
                max_episode_steps: 100,
            },
        }
    }

    pub fn make(self) -> Box<dyn Env> {
        match self {
            EnvName::Pendulum => Box::new(Pendulum::new()),
            EnvName::Pointmass => Box::new(PointMass::new()),
        }
    }
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pendulum" => Ok(EnvName::Pendulum),
            "pointmass" => Ok(EnvName::Pointmass),
            other => Err(Error::Config(format!("unknown environment `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvSpec {
    pub name: EnvName,
    pub observation_dim: usize,
    pub action_dim: usize,
    pub max_episode_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

pub trait Env {
    fn spec(&self) -> EnvSpec;

    fn reset(&mut self, rng: &mut Rng) -> Vec<f64>;

    /// Advances one step. Out-of-range action entries are clipped into
    /// `[-1, 1]` with a warning.
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;
}

fn clip_action(action: &[f64], dim: usize) -> Result<Vec<f64>> {
    check_dim("env action", dim, action.len())?;
    if action.iter().any(|a| a.is_nan()) {
        return Err(Error::NonFinite("env action"));
    }
    if action.iter().any(|a| !(-1.0..=1.0).contains(a)) {
        log::warn!("action {action:?} outside [-1, 1]; clipping");
    }
    Ok(action.iter().map(|a| a.clamp(-1.0, 1.0)).collect())
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let wrapped = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped == -PI {
        PI
    } else {
        wrapped
    }
}

/// Inverted pendulum swing-up; `theta = 0` is upright.
#[derive(Debug, Clone)]
pub struct Pendulum {
    theta: f64,
    theta_dot: f64,
    steps: usize,
    done: bool,
}

impl Pendulum {
    pub const GRAVITY: f64 = 10.0;
    pub const MASS: f64 = 1.0;
    pub const LENGTH: f64 = 1.0;
    pub const DT: f64 = 0.05;
    pub const MAX_SPEED: f64 = 8.0;
    pub const MAX_TORQUE: f64 = 2.0;

    pub fn new() -> Self {
        Pendulum {
            theta: PI,
            theta_dot: 0.0,
            steps: 0,
            done: false,
        }
    }

    /// Places the pendulum in an explicit state and starts a new episode.
    pub fn set_state(&mut self, theta: f64, theta_dot: f64) -> Vec<f64> {
        self.theta = theta;
        self.theta_dot = theta_dot;
        self.steps = 0;
        self.done = false;
        self.observation()
    }

    pub fn state(&self) -> (f64, f64) {
        (self.theta, self.theta_dot)
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for Pendulum {
    fn spec(&self) -> EnvSpec {
        EnvName::Pendulum.spec()
    }

    fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        let theta = rng.random_range(-PI..PI);
        let theta_dot = rng.random_range(-1.0..1.0);
        self.set_state(theta, theta_dot)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let action = clip_action(action, 1)?;
        let u = Self::MAX_TORQUE * action[0];
        let (g, m, l, dt) = (Self::GRAVITY, Self::MASS, Self::LENGTH, Self::DT);
        let th = wrap_angle(self.theta);
        let reward = -(th * th + 0.1 * self.theta_dot * self.theta_dot + 0.001 * u * u);

        let accel = 3.0 * g / (2.0 * l) * self.theta.sin() + 3.0 / (m * l * l) * u;
        self.theta_dot = (self.theta_dot + accel * dt).clamp(-Self::MAX_SPEED, Self::MAX_SPEED);
        self.theta += self.theta_dot * dt;
        self.steps += 1;
        self.done = self.steps >= self.spec().max_episode_steps;
        Ok(StepResult {
            next_state: self.observation(),
            reward,
            done: self.done,
        })
    }
}

/// Damped 2-d point mass that should settle at the origin.
#[derive(Debug, Clone)]
pub struct PointMass {
    pos: [f64; 2],
    vel: [f64; 2],
    steps: usize,
    done: bool,
}

impl PointMass {
    pub const FORCE_SCALE: f64 = 0.1;
    pub const DAMPING: f64 = 0.95;

    pub fn new() -> Self {
        PointMass {
            pos: [0.0; 2],
            vel: [0.0; 2],
            steps: 0,
            done: false,
        }
    }

    pub fn set_state(&mut self, pos: [f64; 2], vel: [f64; 2]) -> Vec<f64> {
        self.pos = pos;
        self.vel = vel;
        self.steps = 0;
        self.done = false;
        self.observation()
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.pos[0], self.pos[1], self.vel[0], self.vel[1]]
    }
}

impl Default for PointMass {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for PointMass {
    fn spec(&self) -> EnvSpec {
        EnvName::Pointmass.spec()
    }

    fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        let pos = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        self.set_state(pos, [0.0; 2])
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let action = clip_action(action, 2)?;
        for i in 0..2 {
            self.vel[i] = Self::DAMPING * self.vel[i] + Self::FORCE_SCALE * action[i];
            self.pos[i] += self.vel[i];
        }
        let dist_sq = self.pos[0] * self.pos[0] + self.pos[1] * self.pos[1];
        let effort = action[0] * action[0] + action[1] * action[1];
        self.steps += 1;
        self.done = self.steps >= self.spec().max_episode_steps;
        Ok(StepResult {
            next_state: self.observation(),
            reward: -dist_sq - 0.01 * effort,
            done: self.done,
        })
    }
}

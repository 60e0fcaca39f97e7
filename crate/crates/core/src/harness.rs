//! Training driver, evaluation protocol and per-run metrics files.
//!
//! # Randomness
//!
//! A run owns one training stream, `seeded_rng(seed)`, consumed in this
//! fixed order:
//!
//! 1. network initialisation (actor, critic 1, critic 2);
//! 2. the first environment reset;
//! 3. per warm-up step: the uniform action, then a reset if the episode ended;
//! 4. per training step: action noise (`K x action_dim` normals for CGAR,
//!    `action_dim` for SAC), the categorical draw (CGAR with `K > 1` only),
//!    a reset if the episode ended, minibatch indices, then critic, actor and
//!    temperature noise.
//!
//! Evaluation draws from a separate stream re-seeded from the run seed at
//! every evaluation, so it never perturbs training and every evaluation
//! starts from the same initial states.
//!
//! # Files
//!
//! A run directory holds `config.json` (the resolved configuration),
//! `metrics.csv`, `status.json`, `agent.ckpt` on completion, and
//! `candidates.csv` when verbose CGAR logging is on. Metrics rows are written
//! with one `write` call each, so an interrupted run leaves a valid prefix.

use std::fmt::Write as _;
use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentState, StepMetrics};
use crate::cgar::{cgar_select, ActionCandidates, CgarParams};
use crate::config::{Algo, TrainConfig};
use crate::envs::EnvName;
use crate::replay::{ReplayBuffer, Transition};
use crate::{seeded_rng, Error, Result, Rng};

pub const METRICS_HEADER: &str = "step,event,mean_return,ep_returns,critic_loss,actor_loss,alpha_loss,alpha,mean_q";
pub const CANDIDATES_HEADER: &str = "step,k,chosen,q_scores,probs";

const EVAL_SEED_SALT: u64 = 0x5eed_e7a1_0000_0001;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub step: usize,
    pub mean_return: f64,
    pub returns: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRow {
    pub step: usize,
    pub metrics: StepMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Completed,
    Failed { step: usize, error: String },
}

/// Everything recorded during one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config: TrainConfig,
    pub evals: Vec<EvalRow>,
    pub train: Vec<TrainRow>,
    pub status: RunStatus,
}

impl RunRecord {
    pub fn is_completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    /// Average of the evaluation means over the whole run.
    pub fn average_return(&self) -> Option<f64> {
        if self.evals.is_empty() {
            None
        } else {
            Some(self.evals.iter().map(|e| e.mean_return).sum::<f64>() / self.evals.len() as f64)
        }
    }

    /// Metrics CSV exactly as [`CsvSink`] writes it.
    pub fn metrics_csv(&self) -> String {
        let mut rows: Vec<(usize, u8, String)> = Vec::new();
        rows.extend(self.train.iter().map(|r| (r.step, 0, train_line(r))));
        rows.extend(self.evals.iter().map(|r| (r.step, 1, eval_line(r))));
        rows.sort_by_key(|(step, order, _)| (*step, *order));
        let mut out = String::from(METRICS_HEADER);
        out.push('\n');
        for (_, _, line) in rows {
            out.push_str(&line);
        }
        out
    }
}

/// Final state of a run alongside its record.
pub struct RunOutput {
    pub record: RunRecord,
    pub agent: AgentState,
    pub buffer: ReplayBuffer,
}

/// Receives rows as the run produces them.
pub trait MetricsSink {
    fn train(&mut self, _row: &TrainRow) -> Result<()> {
        Ok(())
    }

    fn eval(&mut self, _row: &EvalRow) -> Result<()> {
        Ok(())
    }

    fn candidates(&mut self, _step: usize, _candidates: &ActionCandidates) -> Result<()> {
        Ok(())
    }
}

/// Discards everything.
pub struct NullSink;

impl MetricsSink for NullSink {}

fn train_line(r: &TrainRow) -> String {
    let m = &r.metrics;
    format!(
        "{},train,,,{},{},{},{},{}\n",
        r.step, m.critic_loss, m.actor_loss, m.alpha_loss, m.alpha, m.mean_q
    )
}

fn eval_line(r: &EvalRow) -> String {
    format!("{},eval,{},{},,,,,\n", r.step, r.mean_return, join_floats(&r.returns))
}

fn join_floats(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(';');
        }
        write!(s, "{v}").unwrap();
    }
    s
}

fn parse_floats(field: &str, what: &str) -> Result<Vec<f64>> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field
        .split(';')
        .map(|v| v.parse().map_err(|e| Error::parse(what, format!("`{v}`: {e}"))))
        .collect()
}

/// Writes the files of one run directory.
pub struct CsvSink {
    dir: PathBuf,
    metrics: File,
    candidates: Option<File>,
}

impl CsvSink {
    /// Creates `dir`, writes `config.json`, the CSV headers, and a `running`
    /// status.
    pub fn create(dir: &Path, config: &TrainConfig) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let config_path = dir.join("config.json");
        let json = serde_json::to_string_pretty(config).expect("config serializes");
        std::fs::write(&config_path, json + "\n").map_err(|e| Error::io(&config_path, e))?;
        let metrics_path = dir.join("metrics.csv");
        let mut metrics = File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
        metrics
            .write_all(format!("{METRICS_HEADER}\n").as_bytes())
            .map_err(|e| Error::io(&metrics_path, e))?;
        let candidates = if config.verbose && config.algo == Algo::CgarSac {
            let path = dir.join("candidates.csv");
            let mut f = File::create(&path).map_err(|e| Error::io(&path, e))?;
            f.write_all(format!("{CANDIDATES_HEADER}\n").as_bytes())
                .map_err(|e| Error::io(&path, e))?;
            Some(f)
        } else {
            None
        };
        let sink = CsvSink {
            dir: dir.to_path_buf(),
            metrics,
            candidates,
        };
        sink.write_status(&RunStatus::Running)?;
        Ok(sink)
    }

    fn append(&mut self, line: &str) -> Result<()> {
        self.metrics
            .write_all(line.as_bytes())
            .map_err(|e| Error::io(self.dir.join("metrics.csv"), e))
    }

    pub fn write_status(&self, status: &RunStatus) -> Result<()> {
        let path = self.dir.join("status.json");
        let json = serde_json::to_string(status).expect("status serializes");
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl MetricsSink for CsvSink {
    fn train(&mut self, row: &TrainRow) -> Result<()> {
        self.append(&train_line(row))
    }

    fn eval(&mut self, row: &EvalRow) -> Result<()> {
        self.append(&eval_line(row))
    }

    fn candidates(&mut self, step: usize, c: &ActionCandidates) -> Result<()> {
        if let Some(f) = self.candidates.as_mut() {
            let line = format!(
                "{},{},{},{},{}\n",
                step,
                c.k(),
                c.chosen_index,
                join_floats(&c.q_scores),
                join_floats(c.probs.probs())
            );
            f.write_all(line.as_bytes())
                .map_err(|e| Error::io(self.dir.join("candidates.csv"), e))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub mean_return: f64,
    pub returns: Vec<f64>,
}

/// Rolls out `episodes` full episodes with an arbitrary policy and returns
/// the undiscounted episode returns.
pub fn evaluate_with<P>(mut policy: P, env: EnvName, episodes: usize, rng: &mut Rng) -> Result<EvalResult>
where
    P: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if episodes == 0 {
        return Err(Error::Config("evaluation needs at least one episode".into()));
    }
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut e = env.make();
        let mut state = e.reset(rng);
        let mut total = 0.0;
        loop {
            let step = e.step(&policy(&state)?)?;
            total += step.reward;
            if step.done {
                break;
            }
            state = step.next_state;
        }
        returns.push(total);
    }
    let mean_return = returns.iter().sum::<f64>() / episodes as f64;
    Ok(EvalResult { mean_return, returns })
}

/// Evaluates the deterministic action `tanh(mean)`.
pub fn evaluate(agent: &AgentState, env: EnvName, episodes: usize, rng: &mut Rng) -> Result<EvalResult> {
    evaluate_with(|s| Ok(agent.policy(s)?.mode_action()), env, episodes, rng)
}

/// The evaluation stream for a run seed.
pub fn eval_rng(seed: u64) -> Rng {
    seeded_rng(seed ^ EVAL_SEED_SALT)
}

/// Runs warm-up and training as configured. Invalid configurations are an
/// `Err`; numeric failures during training end the run early with a
/// `Failed` status and the metrics gathered so far.
pub fn run_training(config: &TrainConfig, sink: &mut dyn MetricsSink) -> Result<RunOutput> {
    config.validate()?;
    let spec = config.env.spec();
    let mut rng = seeded_rng(config.seed);
    let mut agent = AgentState::from_config(config, &mut rng)?;
    let mut buffer = ReplayBuffer::new(config.buffer_capacity)?;
    let mut env = config.env.make();
    let mut state = env.reset(&mut rng);
    let mut record = RunRecord {
        config: config.clone(),
        evals: Vec::new(),
        train: Vec::new(),
        status: RunStatus::Running,
    };

    for _ in 0..config.n_init {
        let action: Vec<f64> = (0..spec.action_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        state = advance(&mut *env, &mut buffer, state, action, &mut rng)?;
    }

    let cgar = CgarParams {
        k: config.k,
        temperature: config.softmax_temperature,
        scorer: config.scorer,
    };
    for step in 1..=config.n_train {
        let outcome = (|| -> Result<StepMetrics> {
            let dist = agent.policy(&state)?;
            let action = match config.algo {
                Algo::Sac => dist.sample(&mut rng).0,
                Algo::CgarSac => {
                    let (action, candidates) = cgar_select(&agent, &dist, &state, cgar, &mut rng)?;
                    if config.verbose {
                        sink.candidates(step, &candidates)?;
                    }
                    action
                }
            };
            state = advance(&mut *env, &mut buffer, std::mem::take(&mut state), action, &mut rng)?;
            agent.train_step(&buffer, config, &mut rng)
        })();
        let metrics = match outcome {
            Ok(m) => m,
            Err(e @ Error::Io { .. }) => return Err(e),
            Err(e) => {
                log::error!("run {} failed at step {step}: {e}", config.label());
                record.status = RunStatus::Failed {
                    step,
                    error: e.to_string(),
                };
                break;
            }
        };
        if step % config.log_interval == 0 {
            let row = TrainRow { step, metrics };
            sink.train(&row)?;
            record.train.push(row);
        }
        if step % config.eval_interval == 0 {
            let result = evaluate(&agent, config.env, config.eval_episodes, &mut eval_rng(config.seed))?;
            let row = EvalRow {
                step,
                mean_return: result.mean_return,
                returns: result.returns,
            };
            log::info!("{} {} seed {} step {step}: eval {:.2}", config.label(), config.env, config.seed, row.mean_return);
            sink.eval(&row)?;
            record.evals.push(row);
        }
    }
    if record.status == RunStatus::Running {
        record.status = RunStatus::Completed;
    }
    Ok(RunOutput { record, agent, buffer })
}

fn advance(
    env: &mut dyn crate::envs::Env,
    buffer: &mut ReplayBuffer,
    state: Vec<f64>,
    action: Vec<f64>,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let step = env.step(&action)?;
    let transition = Transition {
        state,
        action,
        reward: step.reward,
        next_state: step.next_state,
        done: step.done,
    };
    transition.validate()?;
    let next = if step.done {
        env.reset(rng)
    } else {
        transition.next_state.clone()
    };
    buffer.push(transition);
    Ok(next)
}

/// Runs one configuration into `dir`, writing every run file.
pub fn run_to_dir(config: &TrainConfig, dir: &Path) -> Result<RunRecord> {
    let mut sink = CsvSink::create(dir, config)?;
    let output = run_training(config, &mut sink)?;
    if output.record.is_completed() {
        output.agent.save_checkpoint(&dir.join("agent.ckpt"), config.hash())?;
    }
    sink.write_status(&output.record.status)?;
    Ok(output.record)
}

/// Directory name for one run inside a sweep.
pub fn run_dir_name(config: &TrainConfig) -> String {
    format!("{}_{}_seed{}", config.label(), config.env, config.seed)
}

/// Runs every configuration under `root`, `jobs` at a time. Runs share
/// nothing; results come back in input order.
pub fn run_sweep(configs: &[TrainConfig], root: &Path, jobs: usize) -> Vec<Result<RunRecord>> {
    let jobs = jobs.max(1);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<std::sync::Mutex<Option<Result<RunRecord>>>> =
        configs.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(configs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                let Some(config) = configs.get(i) else { break };
                let result = run_to_dir(config, &root.join(run_dir_name(config)));
                *results[i].lock().unwrap() = Some(result);
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every job ran"))
        .collect()
}

/// Parses a metrics CSV back into evaluation and training rows.
pub fn parse_metrics_csv(text: &str) -> Result<(Vec<EvalRow>, Vec<TrainRow>)> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == METRICS_HEADER => {}
        other => return Err(Error::parse("metrics.csv", format!("unexpected header {other:?}"))),
    }
    let mut evals = Vec::new();
    let mut train = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::parse("metrics.csv", format!("line {}: {} fields", n + 2, fields.len())));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|e| Error::parse("metrics.csv", format!("line {}: `{}`: {e}", n + 2, fields[i])))
        };
        let step: usize = fields[0]
            .parse()
            .map_err(|e| Error::parse("metrics.csv", format!("line {}: step: {e}", n + 2)))?;
        match fields[1] {
            "eval" => evals.push(EvalRow {
                step,
                mean_return: num(2)?,
                returns: parse_floats(fields[3], "metrics.csv ep_returns")?,
            }),
            "train" => train.push(TrainRow {
                step,
                metrics: StepMetrics {
                    critic_loss: num(4)?,
                    actor_loss: num(5)?,
                    alpha_loss: num(6)?,
                    alpha: num(7)?,
                    mean_q: num(8)?,
                },
            }),
            other => return Err(Error::parse("metrics.csv", format!("unknown event `{other}`"))),
        }
    }
    Ok((evals, train))
}

/// Loads a run directory written by [`run_to_dir`].
pub fn load_run(dir: &Path) -> Result<RunRecord> {
    let read = |name: &str| {
        let path = dir.join(name);
        std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
    };
    let config: TrainConfig =
        serde_json::from_str(&read("config.json")?).map_err(|e| Error::parse("config.json", e.to_string()))?;
    let (evals, train) = parse_metrics_csv(&read("metrics.csv")?)?;
    let status = match read("status.json") {
        Ok(s) => serde_json::from_str(&s).map_err(|e| Error::parse("status.json", e.to_string()))?,
        Err(_) => RunStatus::Running,
    };
    Ok(RunRecord {
        config,
        evals,
        train,
        status,
    })
}

/// Finds every run directory (one holding `config.json` and `metrics.csv`)
/// below `root`, in sorted path order.
pub fn find_run_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        if dir.join("config.json").is_file() && dir.join("metrics.csv").is_file() {
            found.push(dir.clone());
        }
        let entries = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            if entry.file_type().map(|t| t.is_dir()).unwrap_or(false) {
                stack.push(entry.path());
            }
        }
    }
    found.sort();
    Ok(found)
}

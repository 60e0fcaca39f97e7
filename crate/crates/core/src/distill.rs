//! Teacher/student experiment with two identical MLPs.
//!
//! `M1` fits the labels of a synthetic blob dataset; `M2` never sees labels
//! and fits the softmax of `M1`'s logits instead. The two are updated in
//! alternation on every minibatch, and both are scored on held-out data after
//! every epoch.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::adam::AdamState;
use crate::distributions::softmax;
use crate::nn::{Activation, GradBuffer, Mlp};
use crate::{seeded_rng, Error, Result};

pub const CSV_HEADER: &str = "seed,epoch,variant,acc_m1,acc_m2";

pub const DEFAULT_PER_CLASS: usize = 150;
pub const DEFAULT_CLASSES: usize = 4;
pub const DEFAULT_SPREAD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct DemoDataset {
    pub inputs: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub train: Vec<usize>,
    pub eval: Vec<usize>,
    pub centers: Vec<[f64; 2]>,
}

/// `classes` Gaussian blobs centred on a radius-2 circle, split 80/20 within
/// each class.
pub fn generate_dataset(n_per_class: usize, classes: usize, spread: f64, seed: u64) -> Result<DemoDataset> {
    if classes < 2 {
        return Err(Error::Config("need at least two classes".into()));
    }
    if n_per_class == 0 || !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::Config("n_per_class must be positive and spread non-negative".into()));
    }
    let mut rng = seeded_rng(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let centers: Vec<[f64; 2]> = (0..classes)
        .map(|c| {
            let angle = 2.0 * PI * c as f64 / classes as f64;
            [2.0 * angle.cos(), 2.0 * angle.sin()]
        })
        .collect();
    let mut inputs = Vec::with_capacity(n_per_class * classes);
    let mut labels = Vec::with_capacity(n_per_class * classes);
    let mut train = Vec::new();
    let mut eval = Vec::new();
    let n_train = (n_per_class * 4) / 5;
    for (c, center) in centers.iter().enumerate() {
        let mut idx = Vec::with_capacity(n_per_class);
        for _ in 0..n_per_class {
            idx.push(inputs.len());
            inputs.push([
                center[0] + spread * noise.sample(&mut rng),
                center[1] + spread * noise.sample(&mut rng),
            ]);
            labels.push(c);
        }
        train.extend_from_slice(&idx[..n_train]);
        eval.extend_from_slice(&idx[n_train..]);
    }
    Ok(DemoDataset {
        inputs,
        labels,
        classes,
        train,
        eval,
        centers,
    })
}

impl DemoDataset {
    /// Eval accuracy of assigning each point to the nearest true centre.
    pub fn nearest_center_accuracy(&self) -> f64 {
        let correct = self
            .eval
            .iter()
            .filter(|&&i| {
                let x = self.inputs[i];
                let best = (0..self.classes)
                    .min_by(|&a, &b| {
                        dist_sq(x, self.centers[a]).total_cmp(&dist_sq(x, self.centers[b]))
                    })
                    .unwrap();
                best == self.labels[i]
            })
            .count();
        correct as f64 / self.eval.len() as f64
    }

    fn rows(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().flat_map(|&i| self.inputs[i]).collect()
    }
}

fn dist_sq(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Loss used by the teacher `M1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Cross-entropy against the labels.
    Ce,
    /// Mean squared error against one-hot labels.
    Mse,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Ce => "ce",
            Variant::Mse => "mse",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ce" => Ok(Variant::Ce),
            "mse" => Ok(Variant::Mse),
            other => Err(Error::Config(format!("unknown distillation variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistillConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            hidden: vec![16, 16],
            lr: 1e-3,
            batch_size: 32,
            epochs: 30,
        }
    }
}

/// Eval accuracies per epoch; index 0 is before any training.
#[derive(Debug, Clone, PartialEq)]
pub struct DistillHistory {
    pub variant: Variant,
    pub seed: u64,
    pub acc_m1: Vec<f64>,
    pub acc_m2: Vec<f64>,
}

impl DistillHistory {
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for (epoch, (a1, a2)) in self.acc_m1.iter().zip(&self.acc_m2).enumerate() {
            out.push_str(&format!("{},{},{},{},{}\n", self.seed, epoch, self.variant, a1, a2));
        }
        out
    }
}

pub fn train_pair_ce(dataset: &DemoDataset, config: &DistillConfig, seed: u64) -> Result<DistillHistory> {
    train_pair(dataset, Variant::Ce, config, seed)
}

pub fn train_pair_mse(dataset: &DemoDataset, config: &DistillConfig, seed: u64) -> Result<DistillHistory> {
    train_pair(dataset, Variant::Mse, config, seed)
}

/// Trains `M1` on the labels and `M2` on `softmax(M1(x))`, alternating per
/// minibatch. A numeric failure ends training early and returns the epochs
/// completed so far.
pub fn train_pair(dataset: &DemoDataset, variant: Variant, config: &DistillConfig, seed: u64) -> Result<DistillHistory> {
    if config.batch_size == 0 || config.lr.is_nan() || config.lr <= 0.0 {
        return Err(Error::Config("batch_size and lr must be positive".into()));
    }
    let c = dataset.classes;
    let mut sizes = vec![2];
    sizes.extend_from_slice(&config.hidden);
    sizes.push(c);
    let mut rng = seeded_rng(seed);
    let mut m1 = Mlp::new(&sizes, Activation::Relu, &mut rng)?;
    let mut m2 = Mlp::new(&sizes, Activation::Relu, &mut rng)?;
    let mut opt1 = AdamState::new(m1.num_params());
    let mut opt2 = AdamState::new(m2.num_params());
    let eval_x = dataset.rows(&dataset.eval);
    let eval_y: Vec<usize> = dataset.eval.iter().map(|&i| dataset.labels[i]).collect();

    let mut history = DistillHistory {
        variant,
        seed,
        acc_m1: vec![accuracy(&m1, &eval_x, &eval_y)?],
        acc_m2: vec![accuracy(&m2, &eval_x, &eval_y)?],
    };
    let mut order = dataset.train.clone();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let outcome = (|| -> Result<()> {
            for chunk in order.chunks(config.batch_size) {
                let x = dataset.rows(chunk);
                let y: Vec<usize> = chunk.iter().map(|&i| dataset.labels[i]).collect();
                teacher_step(&mut m1, &mut opt1, variant, &x, &y, config.lr)?;
                let teacher_logits = m1.forward_batch(&x, chunk.len())?.output().to_vec();
                student_step(&mut m2, &mut opt2, &x, &teacher_logits, c, config.lr)?;
            }
            Ok(())
        })();
        if let Err(e) = outcome {
            log::error!("distillation seed {seed} failed in epoch {epoch}: {e}");
            break;
        }
        history.acc_m1.push(accuracy(&m1, &eval_x, &eval_y)?);
        history.acc_m2.push(accuracy(&m2, &eval_x, &eval_y)?);
    }
    Ok(history)
}

fn teacher_step(m: &mut Mlp, opt: &mut AdamState, variant: Variant, x: &[f64], y: &[usize], lr: f64) -> Result<()> {
    let n = y.len();
    let c = m.output_dim();
    let cache = m.forward_batch(x, n)?;
    let mut upstream = vec![0.0; n * c];
    for (i, logits) in cache.output().chunks_exact(c).enumerate() {
        let row = &mut upstream[i * c..(i + 1) * c];
        match variant {
            Variant::Ce => {
                let p = softmax(logits)?;
                for (k, g) in row.iter_mut().enumerate() {
                    let target = if k == y[i] { 1.0 } else { 0.0 };
                    *g = (p.probs()[k] - target) / n as f64;
                }
            }
            Variant::Mse => {
                for (k, g) in row.iter_mut().enumerate() {
                    let target = if k == y[i] { 1.0 } else { 0.0 };
                    *g = 2.0 * (logits[k] - target) / (n * c) as f64;
                }
            }
        }
    }
    apply(m, opt, &cache, &upstream, lr)
}

/// Soft-target cross-entropy against `softmax(teacher_logits)`; the targets
/// are constants here, so nothing flows back into the teacher.
fn student_step(m: &mut Mlp, opt: &mut AdamState, x: &[f64], teacher_logits: &[f64], c: usize, lr: f64) -> Result<()> {
    let n = teacher_logits.len() / c;
    let cache = m.forward_batch(x, n)?;
    let mut upstream = vec![0.0; n * c];
    for i in 0..n {
        let target = softmax(&teacher_logits[i * c..(i + 1) * c])?;
        let p = softmax(&cache.output()[i * c..(i + 1) * c])?;
        for k in 0..c {
            upstream[i * c + k] = (p.probs()[k] - target.probs()[k]) / n as f64;
        }
    }
    apply(m, opt, &cache, &upstream, lr)
}

fn apply(m: &mut Mlp, opt: &mut AdamState, cache: &crate::nn::ForwardCache, upstream: &[f64], lr: f64) -> Result<()> {
    let mut grads = GradBuffer::zeros_like(m);
    m.backward_batch(cache, upstream, Some(&mut grads))?;
    opt.step(m.params_mut(), grads.as_slice(), lr)
}

fn accuracy(m: &Mlp, x: &[f64], y: &[usize]) -> Result<f64> {
    let c = m.output_dim();
    let out = m.forward_batch(x, y.len())?;
    let correct = out
        .output()
        .chunks_exact(c)
        .zip(y)
        .filter(|(logits, &label)| argmax(logits) == label)
        .count();
    Ok(correct as f64 / y.len() as f64)
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

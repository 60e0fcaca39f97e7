//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string so the page needs no generated types.
//! The `*_json` functions hold the logic and are plain Rust, testable natively.

use cgar_core::cgar::{redistribute, sample_action_set};
use cgar_core::distill::{self, DistillConfig, Variant};
use cgar_core::distributions::PolicyDistribution;
use cgar_core::{seeded_rng, Result};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Peak of the toy critic `Q(a) = -4 (a - 0.5)^2`.
pub const CRITIC_PEAK: f64 = 0.5;
const BINS: usize = 40;
const TRIALS: usize = 20_000;

pub fn toy_critic(a: f64) -> f64 {
    -4.0 * (a - CRITIC_PEAK).powi(2)
}

fn bin_of(a: f64) -> usize {
    (((a + 1.0) / 2.0 * BINS as f64) as usize).min(BINS - 1)
}

/// One candidate draw with its scores and probabilities, plus histograms of
/// plain policy samples and redistributed choices over many trials.
pub fn redistribution_json(k: usize, temperature: f64, mean: f64, log_std: f64, seed: u64) -> Result<String> {
    let dist = PolicyDistribution::new(vec![mean], vec![log_std])?;
    let mut rng = seeded_rng(seed);
    let draw = |rng: &mut cgar_core::Rng| -> Result<(Vec<f64>, Vec<f64>, usize)> {
        let (actions, _) = sample_action_set(&dist, k, rng)?;
        let a: Vec<f64> = actions.into_iter().map(|v| v[0]).collect();
        let q: Vec<f64> = a.iter().map(|&x| toy_critic(x)).collect();
        let probs = redistribute(&q, temperature)?;
        let chosen = if k == 1 { 0 } else { probs.sample(rng) };
        Ok((a, probs.probs().to_vec(), chosen))
    };
    let (actions, probs, chosen) = draw(&mut rng)?;

    let mut policy_hist = vec![0.0; BINS];
    let mut cgar_hist = vec![0.0; BINS];
    let (mut policy_q, mut cgar_q) = (0.0, 0.0);
    for _ in 0..TRIALS {
        let (a, _, c) = draw(&mut rng)?;
        policy_hist[bin_of(a[0])] += 1.0;
        policy_q += toy_critic(a[0]);
        cgar_hist[bin_of(a[c])] += 1.0;
        cgar_q += toy_critic(a[c]);
    }
    let density = BINS as f64 / (2.0 * TRIALS as f64);
    policy_hist.iter_mut().chain(cgar_hist.iter_mut()).for_each(|h| *h *= density);
    let candidates: Vec<_> = actions
        .iter()
        .zip(&probs)
        .map(|(&a, &p)| json!({ "action": a, "q": toy_critic(a), "prob": p }))
        .collect();
    Ok(json!({
        "candidates": candidates,
        "chosen": chosen,
        "bins": BINS,
        "policy_hist": policy_hist,
        "cgar_hist": cgar_hist,
        "policy_mean_q": policy_q / TRIALS as f64,
        "cgar_mean_q": cgar_q / TRIALS as f64,
    })
    .to_string())
}

/// Density of `tanh(u)`, `u ~ N(mean, exp(log_std)^2)`, on an even grid, with
/// its trapezoid integral.
pub fn density_json(mean: f64, log_std: f64, points: usize) -> Result<String> {
    let dist = PolicyDistribution::new(vec![mean], vec![log_std])?;
    let points = points.clamp(16, 4096);
    let h = 2.0 / (points + 1) as f64;
    let a: Vec<f64> = (1..=points).map(|i| -1.0 + i as f64 * h).collect();
    let density = a
        .iter()
        .map(|&x| Ok(dist.log_prob_squashed(&[x.atanh()])?.exp()))
        .collect::<Result<Vec<f64>>>()?;
    let integral = h * (density.iter().sum::<f64>() - 0.5 * (density[0] + density[points - 1]));
    Ok(json!({ "a": a, "density": density, "integral": integral }).to_string())
}

/// Seed-averaged teacher and student accuracy per epoch.
pub fn distill_json(variant: &str, seeds: u32, epochs: u32) -> Result<String> {
    let variant: Variant = variant.parse()?;
    let seeds = seeds.clamp(1, 10);
    let data = distill::generate_dataset(
        distill::DEFAULT_PER_CLASS,
        distill::DEFAULT_CLASSES,
        distill::DEFAULT_SPREAD,
        0,
    )?;
    let config = DistillConfig {
        epochs: epochs.clamp(1, 100) as usize,
        ..DistillConfig::default()
    };
    let mut m1 = vec![0.0; config.epochs + 1];
    let mut m2 = vec![0.0; config.epochs + 1];
    for seed in 0..seeds {
        let h = distill::train_pair(&data, variant, &config, seed as u64)?;
        for (e, (a, b)) in h.acc_m1.iter().zip(&h.acc_m2).enumerate() {
            m1[e] += a / seeds as f64;
            m2[e] += b / seeds as f64;
        }
    }
    Ok(json!({ "teacher": m1, "student": m2, "ceiling": data.nearest_center_accuracy() }).to_string())
}

fn to_js(r: Result<String>) -> std::result::Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn redistribution(k: usize, temperature: f64, mean: f64, log_std: f64, seed: u32) -> std::result::Result<String, JsValue> {
    to_js(redistribution_json(k, temperature, mean, log_std, seed as u64))
}

#[wasm_bindgen]
pub fn density(mean: f64, log_std: f64, points: usize) -> std::result::Result<String, JsValue> {
    to_js(density_json(mean, log_std, points))
}

#[wasm_bindgen]
pub fn distill_curves(variant: &str, seeds: u32, epochs: u32) -> std::result::Result<String, JsValue> {
    to_js(distill_json(variant, seeds, epochs))
}

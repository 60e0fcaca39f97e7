//! Cross-seed aggregation: the summary table and learning curves.

use std::collections::BTreeMap;

use crate::harness::RunRecord;
use crate::{Error, Result};

pub const SUMMARY_HEADER: &str = "algo,env,seeds,mean_avg_return,std_avg_return";
pub const CURVES_HEADER: &str = "algo,env,step,mean,min,max";

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algo: String,
    pub env: String,
    pub seeds: usize,
    pub mean_avg_return: f64,
    /// Population standard deviation over seeds.
    pub std_avg_return: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn get(&self, algo: &str, env: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.algo == algo && r.env == env)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{SUMMARY_HEADER}\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.algo, r.env, r.seeds, r.mean_avg_return, r.std_avg_return
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = parse_table(text, SUMMARY_HEADER, "summary.csv", |f| {
            Ok(SummaryRow {
                algo: f[0].to_string(),
                env: f[1].to_string(),
                seeds: parse_field(f[2], "summary.csv seeds")?,
                mean_avg_return: parse_field(f[3], "summary.csv mean_avg_return")?,
                std_avg_return: parse_field(f[4], "summary.csv std_avg_return")?,
            })
        })?;
        Ok(SummaryTable { rows })
    }

    /// Human-readable table, `mean +- std` per row.
    pub fn render(&self) -> String {
        let mut out = format!("{:<28} {:<10} {:>5}  {:>12}  {:>10}\n", "algo", "env", "seeds", "mean", "std");
        for r in &self.rows {
            out.push_str(&format!(
                "{:<28} {:<10} {:>5}  {:>12.2}  {:>10.2}\n",
                r.algo, r.env, r.seeds, r.mean_avg_return, r.std_avg_return
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub algo: String,
    pub env: String,
    pub step: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

pub fn curves_to_csv(rows: &[CurveRow]) -> String {
    let mut out = format!("{CURVES_HEADER}\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{},{}\n", r.algo, r.env, r.step, r.mean, r.min, r.max));
    }
    out
}

pub fn curves_from_csv(text: &str) -> Result<Vec<CurveRow>> {
    parse_table(text, CURVES_HEADER, "curves.csv", |f| {
        Ok(CurveRow {
            algo: f[0].to_string(),
            env: f[1].to_string(),
            step: parse_field(f[2], "curves.csv step")?,
            mean: parse_field(f[3], "curves.csv mean")?,
            min: parse_field(f[4], "curves.csv min")?,
            max: parse_field(f[5], "curves.csv max")?,
        })
    })
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| Error::parse(what, format!("`{s}`: {e}")))
}

fn parse_table<T>(text: &str, header: &str, what: &str, row: impl Fn(&[&str]) -> Result<T>) -> Result<Vec<T>> {
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(Error::parse(what, "unexpected header"));
    }
    let columns = header.split(',').count();
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let fields: Vec<&str> = l.split(',').collect();
            if fields.len() != columns {
                return Err(Error::parse(what, format!("expected {columns} fields in `{l}`")));
            }
            row(&fields)
        })
        .collect()
}

/// Completed runs grouped by (label, env), checked to share an evaluation
/// schedule. Incomplete runs are skipped.
fn group(records: &[RunRecord]) -> Result<BTreeMap<(String, String), Vec<&RunRecord>>> {
    let mut groups: BTreeMap<(String, String), Vec<&RunRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_completed()) {
        groups
            .entry((r.config.label(), r.config.env.to_string()))
            .or_default()
            .push(r);
    }
    for ((algo, env), runs) in &groups {
        let schedule: Vec<usize> = runs[0].evals.iter().map(|e| e.step).collect();
        if schedule.is_empty() {
            return Err(Error::Aggregation(format!("{algo}/{env}: run has no evaluations")));
        }
        for r in &runs[1..] {
            if !r.evals.iter().map(|e| e.step).eq(schedule.iter().copied()) {
                return Err(Error::Aggregation(format!(
                    "{algo}/{env}: seeds {} and {} have different evaluation schedules",
                    runs[0].config.seed, r.config.seed
                )));
            }
        }
    }
    Ok(groups)
}

/// Per run, averages the evaluation means over the whole run; then reports
/// mean and population standard deviation of those averages over seeds.
pub fn summarize(records: &[RunRecord]) -> Result<SummaryTable> {
    let rows = group(records)?
        .into_iter()
        .map(|((algo, env), runs)| {
            let averages: Vec<f64> = runs.iter().map(|r| r.average_return().unwrap()).collect();
            let (mean, std) = mean_and_population_std(&averages);
            SummaryRow {
                algo,
                env,
                seeds: averages.len(),
                mean_avg_return: mean,
                std_avg_return: std,
            }
        })
        .collect();
    Ok(SummaryTable { rows })
}

/// One row per evaluation step and group: mean, min and max over seeds.
pub fn learning_curves(records: &[RunRecord]) -> Result<Vec<CurveRow>> {
    let mut rows = Vec::new();
    for ((algo, env), runs) in group(records)? {
        for (i, eval) in runs[0].evals.iter().enumerate() {
            let values: Vec<f64> = runs.iter().map(|r| r.evals[i].mean_return).collect();
            let (mean, _) = mean_and_population_std(&values);
            rows.push(CurveRow {
                algo: algo.clone(),
                env: env.clone(),
                step: eval.step,
                mean,
                min: values.iter().copied().fold(f64::INFINITY, f64::min),
                max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }
    Ok(rows)
}

pub fn mean_and_population_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cgar_core::config::{Algo, CriticChoice, TrainConfig};
use cgar_core::distill::{self, DistillConfig, Variant};
use cgar_core::envs::EnvName;
use cgar_core::harness::{find_run_dirs, load_run, run_dir_name, run_sweep, run_to_dir};
use cgar_core::summary::{curves_to_csv, learning_curves, summarize};
use cgar_core::{Error, Result};

#[derive(Parser)]
#[command(name = "cgar", version, about = "SAC and critic-guided action redistribution on toy control tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and write its run directory.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "sac")]
        algo: Algo,
        #[arg(long, default_value = "pendulum")]
        env: EnvName,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every combination of algorithm, environment, K and seed.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated list.
        #[arg(long, value_delimiter = ',', default_value = "sac,cgar-sac")]
        algo: Vec<Algo>,
        /// Comma-separated list.
        #[arg(long, value_delimiter = ',', default_value = "pendulum,pointmass")]
        env: Vec<EnvName>,
        /// Comma-separated list of candidate counts for cgar-sac.
        #[arg(long, value_delimiter = ',', default_value = "10")]
        k: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        /// Runs trained concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate every run below DIR into summary.csv and curves.csv.
    Summarize { dir: PathBuf },
    /// Teacher/student distillation demo.
    Distill {
        #[arg(long, default_value = "ce")]
        variant: Variant,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 30_000)]
    steps: usize,
    #[arg(long, default_value_t = 1000)]
    eval_interval: usize,
    #[arg(long, default_value_t = 1000)]
    init_steps: usize,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, default_value = "min")]
    scorer: CriticChoice,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    /// Log every CGAR candidate set to candidates.csv.
    #[arg(long)]
    verbose: bool,
}

impl RunArgs {
    fn config(&self, algo: Algo, env: EnvName, seed: u64, k: usize) -> TrainConfig {
        TrainConfig {
            algo,
            env,
            seed,
            k,
            n_train: self.steps,
            n_init: self.init_steps,
            eval_interval: self.eval_interval,
            softmax_temperature: self.temperature,
            scorer: self.scorer,
            batch_size: self.batch_size,
            verbose: self.verbose,
            ..TrainConfig::default()
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train { run, algo, env, seed, k, out } => {
            let config = run.config(algo, env, seed, k);
            let record = run_to_dir(&config, &out)?;
            println!(
                "{} {} seed {}: {:?}, average return {:.2}",
                config.label(),
                env,
                seed,
                record.status,
                record.average_return().unwrap_or(f64::NAN)
            );
        }
        Command::Sweep { run, algo, env, k, seeds, first_seed, jobs, out } => {
            let mut configs = Vec::new();
            for &e in &env {
                for &a in &algo {
                    let ks: &[usize] = if a == Algo::Sac { &[1] } else { &k };
                    for &kk in ks {
                        for seed in first_seed..first_seed + seeds {
                            configs.push(run.config(a, e, seed, kk));
                        }
                    }
                }
            }
            let mut failed = 0;
            for (config, result) in configs.iter().zip(run_sweep(&configs, &out, jobs)) {
                match result {
                    Ok(r) if r.is_completed() => {}
                    Ok(r) => {
                        failed += 1;
                        eprintln!("{}: {:?}", run_dir_name(config), r.status);
                    }
                    Err(e) => {
                        failed += 1;
                        eprintln!("{}: {e}", run_dir_name(config));
                    }
                }
            }
            summarize_dir(&out)?;
            if failed > 0 {
                return Err(Error::Aggregation(format!("{failed} of {} runs did not complete", configs.len())));
            }
        }
        Command::Summarize { dir } => summarize_dir(&dir)?,
        Command::Distill { variant, seeds, epochs, out } => {
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let dataset = distill::generate_dataset(distill::DEFAULT_PER_CLASS, distill::DEFAULT_CLASSES, distill::DEFAULT_SPREAD, 0)?;
            let config = DistillConfig { epochs, ..DistillConfig::default() };
            let mut csv = format!("{}\n", distill::CSV_HEADER);
            for seed in 0..seeds {
                let h = distill::train_pair(&dataset, variant, &config, seed)?;
                println!(
                    "seed {seed}: final acc_m1 {:.3} acc_m2 {:.3}",
                    h.acc_m1.last().unwrap(),
                    h.acc_m2.last().unwrap()
                );
                csv.push_str(&h.csv_rows());
            }
            let path = out.join(format!("distill_{variant}.csv"));
            std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn summarize_dir(dir: &Path) -> Result<()> {
    let records = find_run_dirs(dir)?
        .iter()
        .map(|d| load_run(d))
        .collect::<Result<Vec<_>>>()?;
    let table = summarize(&records)?;
    let curves = learning_curves(&records)?;
    for (name, body) in [("summary.csv", table.to_csv()), ("curves.csv", curves_to_csv(&curves))] {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    print!("{}", table.render());
    Ok(())
}

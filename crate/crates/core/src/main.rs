use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cubechase::actor::PolicyModel;
use cubechase::chasenet::{CostModel, Variant};
use cubechase::harness::{
    evaluate_spearman, evaluate_success_rate, new_run_dir, run_pipeline, run_training, run_warmup, write_loss_csv,
    RunConfig,
};
use cubechase::oracle::{build_oracle, OracleTable};

#[derive(Parser)]
#[command(name = "cubechase", version, about = "Search-free 2x2x2 solver: oracle, cost model, PPO policy")]
struct Cli {
    /// TOML run config; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or inspect the exact distance table.
    #[command(subcommand)]
    Oracle(OracleCmd),
    /// Train a cost model on random-walk pairs.
    Warmup(WarmupArgs),
    /// PPO training against a warmed-up cost model.
    Train(TrainArgs),
    /// Evaluate trained checkpoints.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Oracle, warmup, training and evaluation in one run directory.
    Run(RunArgs),
}

#[derive(Subcommand)]
enum OracleCmd {
    Build {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Stats {
        #[arg(long)]
        path: Option<PathBuf>,
    },
}

#[derive(Args)]
struct WarmupArgs {
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    twists: Option<usize>,
    #[arg(long)]
    dataset_size: Option<usize>,
    /// Checkpoint path; the loss series goes next to it as `<stem>.loss.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    cost_ckpt: PathBuf,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    buffer: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Subcommand)]
enum EvalCmd {
    Success {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        n_tests: Option<usize>,
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long)]
        depth_min: Option<usize>,
        #[arg(long)]
        depth_max: Option<usize>,
        /// Per-case results as CSV.
        #[arg(long)]
        cases: Option<PathBuf>,
        /// Exit nonzero below this rate.
        #[arg(long, default_value_t = 0.95)]
        threshold: f64,
        #[arg(long)]
        strict: bool,
    },
    Spearman {
        #[arg(long)]
        cost_ckpt: PathBuf,
        #[arg(long)]
        oracle: Option<PathBuf>,
        #[arg(long)]
        pairs: Option<usize>,
        /// Exit nonzero below this coefficient; defaults to 0.80 (fc) or 0.85 (attention).
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Re-evaluate the checkpoints of an existing run directory.
    #[arg(long)]
    eval_only: Option<PathBuf>,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("runs"))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn gate(strict: bool, value: f64, threshold: f64, what: &str) -> ExitCode {
    let pass = value >= threshold;
    println!("{what} {value:.4} (threshold {threshold}) {}", if pass { "PASS" } else { "FAIL" });
    if strict && !pass {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    let mut cfg = load_config(&cli)?;
    match &cli.command {
        Command::Oracle(OracleCmd::Build { out }) => {
            let path = out.clone().unwrap_or(cfg.oracle_path.clone());
            let t = std::time::Instant::now();
            let o = build_oracle();
            o.save(&path)?;
            println!(
                "built {} states, max depth {}, in {:.2}s -> {}",
                o.reachable(),
                o.max_depth(),
                t.elapsed().as_secs_f64(),
                path.display()
            );
        }
        Command::Oracle(OracleCmd::Stats { path }) => {
            let path = path.clone().unwrap_or(cfg.oracle_path.clone());
            let o = OracleTable::load_or_build(&path)?;
            println!("states {}", o.reachable());
            println!("max_depth {}", o.max_depth());
            for (d, n) in o.histogram().iter().enumerate() {
                println!("depth {d:2} {n}");
            }
        }
        Command::Warmup(a) => {
            if let Some(v) = a.variant {
                cfg.chasenet.variant = v;
            }
            if let Some(j) = a.iters {
                cfg.warmup.iters = j;
            }
            if let Some(k) = a.twists {
                cfg.warmup.twists = k;
            }
            if let Some(b) = a.dataset_size {
                cfg.warmup.dataset_size = b;
            }
            cfg.validate()?;
            let (model, losses) = run_warmup::<f32>(&cfg.chasenet, &cfg.warmup, cfg.seed, |j, l| {
                if (j + 1) % 50 == 0 || j == 0 {
                    eprintln!("warmup {:>5} loss {l:.4}", j + 1);
                }
                Ok(())
            })?;
            model.save(&a.out)?;
            write_loss_csv(&with_suffix(&a.out, ".loss.csv"), &losses)?;
            println!("saved {}", a.out.display());
        }
        Command::Train(a) => {
            if let Some(j) = a.iters {
                cfg.actor.iters = j;
            }
            if let Some(b) = a.buffer {
                cfg.actor.buffer = b;
            }
            if let Some(e) = a.eps {
                cfg.actor.eps = e;
            }
            cfg.validate()?;
            let cost = CostModel::<f32>::load(&a.cost_ckpt)?;
            let dir = out_dir(&cli);
            fs::create_dir_all(&dir)?;
            fs::write(dir.join("config.toml"), cfg.to_toml())?;
            run_training(cost, &cfg.env, &cfg.actor, cfg.seed, cfg.checkpoint_every, &dir, |s| {
                eprintln!(
                    "iter {:>5} episodes {:>4} reward {:>9.3} success {:.3} entropy {:.3}",
                    s.iteration, s.episodes, s.mean_reward, s.success_rate, s.entropy
                );
                Ok(())
            })?;
            println!("saved checkpoints and metrics.csv in {}", dir.display());
        }
        Command::Eval(EvalCmd::Success {
            policy,
            n_tests,
            cap,
            depth_min,
            depth_max,
            cases,
            threshold,
            strict,
        }) => {
            let e = &cfg.eval;
            let theta = PolicyModel::<f32>::load(policy)?;
            let r = evaluate_success_rate(
                &theta,
                n_tests.unwrap_or(e.n_tests),
                depth_min.unwrap_or(e.depth_min),
                depth_max.unwrap_or(e.depth_max),
                cap.unwrap_or(e.cap),
                cfg.seed,
            );
            for (d, (s, t)) in &r.by_depth {
                println!("depth {d:2} {s}/{t}");
            }
            if let Some(p) = cases {
                r.write_cases(p)?;
            }
            return Ok(gate(*strict, r.rate, *threshold, "success_rate"));
        }
        Command::Eval(EvalCmd::Spearman {
            cost_ckpt,
            oracle,
            pairs,
            threshold,
            strict,
        }) => {
            let m = CostModel::<f32>::load(cost_ckpt)?;
            let o = OracleTable::load_or_build(oracle.as_ref().unwrap_or(&cfg.oracle_path))?;
            let rho = evaluate_spearman(
                &m,
                &o,
                pairs.unwrap_or(cfg.eval.spearman_pairs),
                cfg.eval.spearman_twists,
                cfg.seed,
            )?;
            let threshold = threshold.unwrap_or(match m.variant() {
                Variant::Fc => 0.80,
                Variant::Attention => 0.85,
            });
            return Ok(gate(*strict, rho, threshold, "spearman"));
        }
        Command::Run(a) => {
            let (dir, eval_only) = match &a.eval_only {
                Some(d) => {
                    if cli.config.is_none() {
                        cfg = RunConfig::load(&d.join("config.toml"))?;
                    }
                    (d.clone(), true)
                }
                None => (new_run_dir(&out_dir(&cli), cfg.seed)?, false),
            };
            if !dir.is_dir() {
                bail!("{} is not a directory", dir.display());
            }
            let s = run_pipeline(&cfg, &dir, eval_only)?;
            println!("run directory {}", s.dir.display());
            println!("spearman {:.4}", s.spearman);
            println!("success_rate {:.4}", s.success_rate);
            println!("depth1_rate {:.4}", s.depth_one_rate);
            println!("depth2_rate {:.4}", s.depth_two_rate);
        }
    }
    Ok(ExitCode::SUCCESS)
}

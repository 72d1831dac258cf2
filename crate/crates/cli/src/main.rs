use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use nmc_core::eval::{
    eval_eqa, eval_master_iou, eval_subpolicy, random_sequence_iou, replay_episode, MetricReport,
    SubAgent,
};
use nmc_core::planner::Task;
use nmc_core::policy::TrajectoryDump;
use nmc_core::sim::io::{house_file_name, load_house_dir, HouseFile};
use nmc_core::sim::{generate_suite, HouseLayout, Question, Vocab};
use nmc_core::train::metrics::MetricLog;
use nmc_core::train::stage::train_house_ids;
use nmc_core::train::{eval_suite, new_model, run_stage, Config, Stage, TrainData};
use nmc_core::Exec;

/// Hierarchical navigation agents on procedural grid houses.
#[derive(Debug, Parser)]
#[command(name = "nmc", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Args, Clone)]
struct Common {
    /// TOML run configuration; defaults are used for anything it leaves out.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR", default_value = "nmc-out")]
    out: PathBuf,
    /// Run everything on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Generate training and held-out house suites as JSON files.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Training houses (held-out count comes from the config).
        #[arg(long, value_name = "N")]
        houses: Option<usize>,
        /// Questions per house.
        #[arg(long, value_name = "K")]
        questions: Option<usize>,
    },
    /// Build the expert plan corpus for a generated suite.
    Plan {
        #[command(flatten)]
        common: Common,
        /// Directory written by `gen` (uses its `train/` houses).
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
    },
    /// Behavior cloning of answerer, sub-policies and master.
    TrainBc {
        #[command(flatten)]
        common: Common,
        /// Directory written by `gen`; the suite is generated from the seed when absent.
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
        /// Overrides every behavior-cloning epoch count.
        #[arg(long, value_name = "N")]
        epochs: Option<usize>,
    },
    /// Reinforcement learning of sub-policies (`rl-sub`) or the master (`rl-master`).
    TrainRl {
        #[command(flatten)]
        common: Common,
        /// Checkpoint to start from; a fresh model is used when absent (needs --from-scratch).
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_name = "STAGE", default_value = "rl-sub", value_parser = ["rl-sub", "rl-master"])]
        stage: String,
        /// Restrict `rl-sub` to one task (exit-room, find-room, find-object).
        #[arg(long, value_name = "TASK")]
        task: Option<String>,
        /// Allow RL without a behavior-cloned checkpoint.
        #[arg(long)]
        from_scratch: bool,
        /// Overrides the number of training rounds.
        #[arg(long, value_name = "N")]
        rounds: Option<usize>,
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
    },
    /// Joint fine-tuning of master and sub-policies.
    Finetune {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "N")]
        rounds: Option<usize>,
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the held-out suite; writes report.csv and dumps/.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Directory written by `gen` (uses its `eval/` houses).
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
        /// Spawns per task for sub-policy success.
        #[arg(long, value_name = "N")]
        episodes: Option<usize>,
    },
    /// Pretty-print a trajectory dump with subgoal annotations.
    Inspect {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        dump: PathBuf,
    },
}

fn load_config(c: &Common) -> Result<Config> {
    let mut cfg = match &c.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if c.sequential {
        cfg.exec = Exec::Sequential;
    }
    Ok(cfg)
}

fn out_dir(c: &Common) -> Result<&Path> {
    fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
    Ok(&c.out)
}

fn write_suite(dir: &Path, suite: &[(HouseLayout, Vec<Question>)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (h, qs) in suite {
        HouseFile::new(h, qs.clone()).save(&dir.join(house_file_name(h.id)))?;
    }
    Ok(())
}

fn train_data(cfg: &Config, data: Option<&Path>) -> Result<TrainData> {
    Ok(match data {
        Some(d) => TrainData::from_houses(load_house_dir(&d.join("train"))?, cfg)?,
        None => TrainData::generate(cfg)?,
    })
}

fn load_model(
    cfg: &Config,
    checkpoint: Option<&Path>,
) -> Result<(nmc_core::policy::Nmc, nmc_core::tensor::ParamStore)> {
    let (model, mut store) = new_model(cfg);
    if let Some(p) = checkpoint {
        store
            .load(p)
            .with_context(|| format!("loading checkpoint {}", p.display()))?;
    }
    Ok((model, store))
}

fn save_run(out: &Path, cfg: &Config, store: &nmc_core::tensor::ParamStore) -> Result<()> {
    store.save(&out.join("checkpoint.json"))?;
    fs::write(out.join("config.toml"), cfg.to_toml())?;
    println!("wrote {}", out.join("checkpoint.json").display());
    Ok(())
}

fn train(
    common: &Common,
    cfg: &Config,
    data: Option<&Path>,
    checkpoint: Option<&Path>,
    stage: Stage,
    from_scratch: bool,
    tasks: &[Task],
) -> Result<()> {
    let out = out_dir(common)?;
    let data = train_data(cfg, data)?;
    let (model, mut store) = load_model(cfg, checkpoint)?;
    let mut log = MetricLog::open(&out.join("metrics.csv"), cfg.log.wallclock)?;
    run_stage(
        stage,
        cfg,
        &data,
        &model,
        &mut store,
        &mut log,
        from_scratch,
        tasks,
    )?;
    save_run(out, cfg, &store)
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Gen {
            common,
            houses,
            questions,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(n) = houses {
                cfg.data.train_houses = n;
            }
            if let Some(k) = questions {
                cfg.data.questions_per_house = k;
                cfg.eval.questions_per_house = k;
            }
            let out = out_dir(&common)?;
            let train = generate_suite(
                cfg.seed,
                cfg.data.train_houses,
                cfg.data.questions_per_house,
                cfg.model.q_dim,
                &cfg.gen,
            )?;
            write_suite(&out.join("train"), &train)?;
            write_suite(&out.join("eval"), &eval_suite(&cfg)?)?;
            fs::write(out.join("config.toml"), cfg.to_toml())?;
            println!(
                "wrote {} training and {} held-out houses to {}",
                train.len(),
                cfg.data.eval_houses,
                out.display()
            );
        }
        Cmd::Plan { common, data } => {
            let cfg = load_config(&common)?;
            let out = out_dir(&common)?;
            let td = train_data(&cfg, Some(&data))?;
            let path = out.join("corpus.jsonl");
            td.corpus.write(&path)?;
            println!(
                "wrote {} plans ({} segments) to {}",
                td.corpus.num_plans(),
                td.corpus.num_segments(),
                path.display()
            );
        }
        Cmd::TrainBc {
            common,
            data,
            epochs,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(e) = epochs {
                cfg.bc.epochs_answer = e;
                cfg.bc.epochs_sub = e;
                cfg.bc.epochs_master = e;
            }
            train(&common, &cfg, data.as_deref(), None, Stage::Bc, false, &[])?;
        }
        Cmd::TrainRl {
            common,
            checkpoint,
            stage,
            task,
            from_scratch,
            rounds,
            data,
        } => {
            let mut cfg = load_config(&common)?;
            let stage: Stage = stage.parse()?;
            if let Some(r) = rounds {
                cfg.schedule.rounds_sub = r;
                cfg.schedule.rounds_master = r;
            }
            let tasks = match task {
                Some(t) => match Task::parse(&t) {
                    Some(t) if t != Task::Answer => vec![t],
                    _ => bail!("unknown motion task {t:?}"),
                },
                None => Vec::new(),
            };
            train(
                &common,
                &cfg,
                data.as_deref(),
                checkpoint.as_deref(),
                stage,
                from_scratch,
                &tasks,
            )?;
        }
        Cmd::Finetune {
            common,
            checkpoint,
            rounds,
            data,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(r) = rounds {
                cfg.schedule.rounds_joint = r;
            }
            train(
                &common,
                &cfg,
                data.as_deref(),
                Some(&checkpoint),
                Stage::Joint,
                false,
                &[],
            )?;
        }
        Cmd::Eval {
            common,
            checkpoint,
            data,
            episodes,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(n) = episodes {
                cfg.eval.sub_episodes = n;
            }
            let out = out_dir(&common)?;
            let (model, store) = load_model(&cfg, Some(&checkpoint))?;
            let suite = match &data {
                Some(d) => load_house_dir(&d.join("eval"))?,
                None => eval_suite(&cfg)?,
            };
            let mut report = MetricReport::default();
            for task in Task::MOTION {
                for agent in [SubAgent::Learned, SubAgent::Sampled, SubAgent::Random] {
                    let e = eval_subpolicy(
                        &model,
                        &store,
                        &suite,
                        task,
                        cfg.eval.sub_episodes,
                        agent,
                        cfg.budgets,
                        cfg.seed,
                        cfg.exec,
                    )?;
                    let metric = match agent {
                        SubAgent::Learned => "success",
                        SubAgent::Sampled => "success_sampled",
                        _ => "success_random",
                    };
                    report.push(metric, task.name(), e.episodes, e.rate());
                    if agent == SubAgent::Learned {
                        report.push(
                            "skipped_houses",
                            task.name(),
                            e.episodes,
                            e.skipped_houses as f64,
                        );
                    }
                }
            }
            let held_out = TrainData::from_houses(suite.clone(), &cfg)?;
            let iou = eval_master_iou(
                &model,
                &store,
                &held_out.corpus.plans,
                cfg.eval.iou_sequence,
                cfg.exec,
            )?;
            let base = random_sequence_iou(
                &model,
                &held_out.corpus.plans,
                cfg.eval.iou_sequence,
                cfg.seed,
            );
            report.push("iou", "master", iou.episodes, iou.mean);
            report.push("iou_random", "master", base.episodes, base.mean);

            let run = eval_eqa(
                &model,
                &store,
                &suite,
                &cfg.eval.offsets,
                cfg.budgets,
                &train_house_ids(&store),
                cfg.seed,
                cfg.exec,
            )?;
            report.extend(run.report.clone());
            let vocab = Vocab::new(cfg.gen.vocab);
            let dumps = out.join("dumps");
            fs::create_dir_all(&dumps)?;
            for (case, ep) in run.cases.iter().zip(&run.episodes) {
                let house = &suite[case.house].0;
                replay_episode(house, ep)
                    .with_context(|| format!("replaying episode in house {}", house.id))?;
                let name = format!("h{:06}_q{}_T{}.json", house.id, ep.question_id, case.offset);
                TrajectoryDump::new(ep, &vocab).save(&dumps.join(name))?;
            }
            let path = out.join("report.csv");
            report.write(&path)?;
            print!("{}", report.to_csv()?);
            println!("wrote {} and {} dumps", path.display(), run.episodes.len());
        }
        Cmd::Inspect { common: _, dump } => {
            let d = TrajectoryDump::load(&dump)?;
            print!("{}", d.pretty());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

//! Command-line surface.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use advhedge_core::backtest::{run_backtest, slice_windows, Strategy};
use advhedge_core::instruments::{bs_price_european, BsParams, LookbackMc, OptionKind};
use advhedge_core::networks::HedgerPolicy;
use advhedge_core::autodiff::ParamStore;
use advhedge_core::simulators::Model;
use advhedge_core::toy_analysis::{
    run_toy_adversarial, sweep_case1, sweep_case2, sweep_case3, toy_utility, ToyMarket,
};
use advhedge_core::training::{evaluate, train_adversarial, train_deep_hedging, EvalSummary};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::config::{ExperimentConfig, SimulatorKind, StrategyKind};
use crate::data::load_series;
use crate::error::CliError;
use crate::report::{self, Manifest};

#[derive(Debug, Parser)]
#[command(name = "advhedge", version, about = "Adversarial deep hedging experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML experiment file; defaults apply to anything it leaves out.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set train.epochs=50`.
    #[arg(long = "set", value_name = "K=V")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Root seed, overriding the config.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a hedger on a classical simulator or adversarially.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Replay hedgers and baselines over historical windows.
    Backtest {
        #[command(flatten)]
        common: Common,
        /// `date,close` CSV.
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Hedger checkpoint; omit to run only the baselines.
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
    /// Score hedgers and baselines on fresh simulated batches.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
    /// One-step toy market: utility sweeps and the adversarial trajectory.
    Toy {
        #[command(flatten)]
        common: Common,
        /// 1: δ sweep, 2: δ × μ field and trajectory, 3: δ × σ sweep.
        #[arg(long)]
        case: Option<u8>,
    },
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("advhedge: {e}");
            e.exit_code()
        }
    }
}

fn resolve(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(common.config.as_deref(), &common.set)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &ExperimentConfig, command: &str) -> Result<PathBuf, CliError> {
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(command));
    std::fs::create_dir_all(&dir).map_err(CliError::write(&dir))?;
    Ok(dir)
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train { common } => {
            let cfg = resolve(&common)?;
            let out = out_dir(&common, &cfg, "train")?;
            cmd_train(&cfg, &out)
        }
        Command::Backtest {
            common,
            data,
            checkpoint,
        } => {
            let cfg = resolve(&common)?;
            let out = out_dir(&common, &cfg, "backtest")?;
            cmd_backtest(&cfg, &data, checkpoint.as_deref(), &out)
        }
        Command::Eval { common, checkpoint } => {
            let cfg = resolve(&common)?;
            let out = out_dir(&common, &cfg, "eval")?;
            cmd_eval(&cfg, checkpoint.as_deref(), &out)
        }
        Command::Toy { common, case } => {
            let cfg = resolve(&common)?;
            let case = case.unwrap_or(cfg.toy.case);
            if !(1..=3).contains(&case) {
                return Err(CliError::Usage(format!("--case must be 1, 2 or 3, got {case}")));
            }
            let out = out_dir(&common, &cfg, "toy")?;
            cmd_toy(&cfg, case, &out)
        }
    }
}

#[derive(Serialize)]
struct TrainSummary {
    mode: &'static str,
    epochs: usize,
    final_hedger_loss: f64,
    /// Hedge cost of the saved hedger on a held-out batch of the
    /// evaluation model.
    heldout_cost: f64,
    heldout_paths: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_snapshot_epoch: Option<usize>,
}

pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let obj = cfg.objective();
    let arch = cfg.hedger_arch();
    let tc = cfg.train_config();
    let spec = cfg.spec();
    let heldout_seed = advhedge_core::rng::derive_seed(cfg.seed, advhedge_core::rng::stream::BASELINE);
    let heldout = |policy: &HedgerPolicy, store: &ParamStore| -> Result<f64, CliError> {
        let st = Strategy::Hedger {
            label: "hedger",
            policy,
            store,
        };
        evaluate(&st, &cfg.simulator(), &obj, tc.eval_paths, 1, heldout_seed)
            .map(|s| s.mean)
            .map_err(CliError::runtime("held-out evaluation"))
    };
    let summary = match cfg.simulator.model {
        SimulatorKind::Gbm | SimulatorKind::Heston => {
            let run = train_deep_hedging(&cfg.simulator(), &obj, &arch, &tc).map_err(CliError::runtime("training"))?;
            let last = run.history.last().map(|r| r.hedger_loss).unwrap_or(f64::NAN);
            Checkpoint::hedger(&run.hedger, &run.store, spec, tc.epochs - 1, None).save(&out.join("checkpoint.json"))?;
            report::write_text(&out.join("loss_history.csv"), &report::loss_history_csv(&run.history))?;
            TrainSummary {
                mode: "deep_hedging",
                epochs: tc.epochs,
                final_hedger_loss: last,
                heldout_cost: heldout(&run.hedger, &run.store)?,
                heldout_paths: tc.eval_paths,
                best_snapshot_epoch: None,
            }
        }
        SimulatorKind::Adversarial => {
            let run = train_adversarial(&obj, &arch, &cfg.generator_arch(), cfg.simulator.s0, &tc)
                .map_err(CliError::runtime("adversarial training"))?;
            let best = run.best();
            Checkpoint::hedger_snapshot(&run.hedger, &run.store, spec, best.epoch, best.validation_cost, &best.hedger_params)
                .save(&out.join("checkpoint.json"))?;
            for s in &run.snapshots {
                Checkpoint::hedger_snapshot(&run.hedger, &run.store, spec, s.epoch, s.validation_cost, &s.hedger_params)
                    .save(&out.join("snapshots").join(format!("epoch_{:05}.json", s.epoch)))?;
            }
            Checkpoint::generator(&run.generator, &run.store, spec, tc.epochs - 1).save(&out.join("generator.json"))?;
            report::write_text(&out.join("loss_history.csv"), &report::loss_history_csv(&run.history))?;
            let best_store = run.best_store();
            TrainSummary {
                mode: "adversarial",
                epochs: tc.epochs,
                final_hedger_loss: run.history.last().map(|r| r.hedger_loss).unwrap_or(f64::NAN),
                heldout_cost: heldout(&run.hedger, &best_store)?,
                heldout_paths: tc.eval_paths,
                best_snapshot_epoch: Some(best.epoch),
            }
        }
    };
    report::write_json(&out.join("summary.json"), &summary)?;
    Manifest::new("train", cfg).write(out)?;
    println!(
        "{}: {} epochs, held-out cost {} -> {}",
        summary.mode,
        summary.epochs,
        summary.heldout_cost,
        out.display()
    );
    Ok(())
}

fn load_hedger(cfg: &ExperimentConfig, path: &Path) -> Result<(HedgerPolicy, ParamStore), CliError> {
    let ck = Checkpoint::load(path)?;
    ck.check_compatible(&cfg.spec(), &cfg.hedger_arch())?;
    ck.restore_hedger()
}

fn strategy_list(cfg: &ExperimentConfig, have_checkpoint: bool) -> Result<Vec<StrategyKind>, CliError> {
    let list = if cfg.backtest.strategies.is_empty() {
        let mut v = Vec::new();
        if have_checkpoint {
            v.push(StrategyKind::Hedger);
        }
        v.extend([StrategyKind::BsDelta, StrategyKind::ZeroHedge]);
        v
    } else {
        cfg.backtest.strategies.clone()
    };
    if list.contains(&StrategyKind::Hedger) && !have_checkpoint {
        return Err(CliError::Usage("strategy `hedger` needs --checkpoint".into()));
    }
    Ok(list)
}

fn build_strategies<'a>(
    kinds: &[StrategyKind],
    hedger: Option<&'a (HedgerPolicy, ParamStore)>,
    bs_sigma: f64,
    realized: bool,
    lookback_paths: usize,
) -> Vec<Strategy<'a>> {
    kinds
        .iter()
        .map(|k| match k {
            StrategyKind::Hedger => {
                let (policy, store) = hedger.expect("checked by strategy_list");
                Strategy::Hedger {
                    label: "hedger",
                    policy,
                    store,
                }
            }
            StrategyKind::BsDelta => Strategy::BsDelta {
                sigma: bs_sigma,
                realized,
                lookback: LookbackMc {
                    paths: lookback_paths,
                    ..LookbackMc::default()
                },
            },
            StrategyKind::ZeroHedge => Strategy::Zero,
        })
        .collect()
}

pub fn cmd_backtest(cfg: &ExperimentConfig, data: &Path, checkpoint: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let spec = cfg.spec();
    let n = spec.maturity_steps;
    let kinds = strategy_list(cfg, checkpoint.is_some())?;
    let hedger = checkpoint.map(|p| load_hedger(cfg, p)).transpose()?;
    let series = load_series(data, n + 1)?;
    let windows = slice_windows(&series, n).map_err(CliError::config(data.display()))?;
    let b = &cfg.backtest;
    let strategies = build_strategies(&kinds, hedger.as_ref(), b.bs_sigma, b.realized_sigma, b.lookback_mc_paths);
    let rep = run_backtest(&windows, &strategies, &spec, &cfg.utility, &cfg.cost, b.bins)
        .map_err(CliError::runtime("backtest"))?;
    let text = report::backtest_text(&rep);
    report::write_json(&out.join("report.json"), &rep)?;
    report::write_text(&out.join("report.txt"), &text)?;
    report::write_text(&out.join("histogram.csv"), &report::histogram_csv(&rep))?;
    let mut m = Manifest::new("backtest", cfg);
    m.inputs = inputs(&[("data", Some(data)), ("checkpoint", checkpoint)]);
    m.write(out)?;
    print!("{text}");
    Ok(())
}

fn inputs(list: &[(&str, Option<&Path>)]) -> BTreeMap<String, String> {
    list.iter()
        .filter_map(|(k, p)| p.map(|p| (k.to_string(), p.display().to_string())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct EvalRow {
    pub strategy: String,
    #[serde(flatten)]
    pub summary: EvalSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub model: Model,
    pub utility: String,
    pub cost_rate: f64,
    pub batch: usize,
    pub trials: usize,
    /// Black-Scholes price of a European option under a GBM model.
    pub bs_price: Option<f64>,
    pub rows: Vec<EvalRow>,
}

pub fn cmd_eval(cfg: &ExperimentConfig, checkpoint: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let obj = cfg.objective();
    let spec = cfg.spec();
    let kinds = strategy_list(cfg, checkpoint.is_some())?;
    let hedger = checkpoint.map(|p| load_hedger(cfg, p)).transpose()?;
    let strategies = build_strategies(&kinds, hedger.as_ref(), cfg.eval.bs_sigma, false, cfg.backtest.lookback_mc_paths);
    let sim = cfg.simulator();
    let batch = cfg.train.eval_paths;
    let mut rows = Vec::with_capacity(strategies.len());
    for st in &strategies {
        let summary = evaluate(st, &sim, &obj, batch, cfg.eval.trials, cfg.seed).map_err(CliError::runtime("evaluation"))?;
        rows.push(EvalRow {
            strategy: st.label(),
            summary,
        });
    }
    let bs_price = match (sim.model, spec.kind) {
        (Model::Gbm { sigma }, OptionKind::EuropeanCall) => Some(bs_price_european(
            sim.s0,
            &spec,
            &BsParams::new(sigma),
            spec.maturity_years(),
        )),
        _ => None,
    };
    let rep = EvalReport {
        model: sim.model,
        utility: cfg.utility.label(),
        cost_rate: cfg.cost.rate,
        batch,
        trials: cfg.eval.trials,
        bs_price,
        rows,
    };
    let mut text = format!(
        "model: {:?}  utility: {}  batch: {}  trials: {}\n",
        rep.model, rep.utility, rep.batch, rep.trials
    );
    if let Some(p) = bs_price {
        text.push_str(&format!("bs price: {p:.6}\n"));
    }
    text.push_str(&format!("{:<16} {:>14} {:>14}\n", "strategy", "cost_mean", "cost_std"));
    for r in &rep.rows {
        text.push_str(&format!("{:<16} {:>14.6} {:>14.6}\n", r.strategy, r.summary.mean, r.summary.std));
    }
    report::write_json(&out.join("eval.json"), &rep)?;
    report::write_text(&out.join("eval.txt"), &text)?;
    let mut m = Manifest::new("eval", cfg);
    m.inputs = inputs(&[("checkpoint", checkpoint)]);
    m.write(out)?;
    print!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct ToySummary {
    case: u8,
    utility: String,
    market: ToyMarket,
    /// Case 1: δ maximising the utility.
    #[serde(skip_serializing_if = "Option::is_none")]
    argmax_delta: Option<f64>,
    /// Case 3: maximising δ for each σ.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    argmax_delta_per_sigma: Vec<f64>,
    /// Case 3: hedge cost `-u` at δ = 0.5 for each σ.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    cost_at_half: Vec<[f64; 2]>,
    /// Case 2: trajectory end point and divergence flag.
    #[serde(skip_serializing_if = "Option::is_none")]
    final_point: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diverged: Option<bool>,
}

pub fn cmd_toy(cfg: &ExperimentConfig, case: u8, out: &Path) -> Result<(), CliError> {
    let t = &cfg.toy;
    let market = t.market();
    market.validate().map_err(CliError::config("toy"))?;
    let u = cfg.utility;
    let mut summary = ToySummary {
        case,
        utility: u.label(),
        market,
        argmax_delta: None,
        argmax_delta_per_sigma: Vec::new(),
        cost_at_half: Vec::new(),
        final_point: None,
        diverged: None,
    };
    let runtime = CliError::runtime("toy analysis");
    let sweep = match case {
        1 => {
            let s = sweep_case1(&market, &u, &t.delta_axis()?, t.mc_samples, cfg.seed).map_err(runtime)?;
            summary.argmax_delta = Some(s.axes[0].at(s.argmax_first(0)));
            s
        }
        2 => {
            // The gradient field shares the trajectory's noise sample.
            let s = sweep_case2(&market, &u, &t.delta_axis()?, &t.mu_axis()?, t.trajectory_mc_samples, cfg.seed)
                .map_err(runtime)?;
            let traj = run_toy_adversarial(&t.adversarial(u, cfg.seed)).map_err(CliError::runtime("toy trajectory"))?;
            report::write_text(&out.join("trajectory.csv"), &report::trajectory_csv(&traj))?;
            let last = traj.last();
            summary.final_point = Some([last.delta, last.mu]);
            summary.diverged = Some(traj.diverged);
            s
        }
        _ => {
            let sig = t.sigma_axis()?;
            let s = sweep_case3(&market, &u, &t.delta_axis()?, &sig, t.mc_samples, cfg.seed).map_err(runtime)?;
            summary.argmax_delta_per_sigma = s.argmax_per_column();
            for sigma in sig.points() {
                let m = ToyMarket { sigma, ..market };
                let v = toy_utility(0.5, &m, &u, t.mc_samples, cfg.seed).map_err(CliError::runtime("toy utility"))?;
                summary.cost_at_half.push([sigma, -v]);
            }
            s
        }
    };
    report::write_text(&out.join("sweep.csv"), &report::sweep_csv(&sweep))?;
    report::write_json(&out.join("summary.json"), &summary)?;
    Manifest::new("toy", cfg).write(out)?;
    println!("toy case {case} ({}) -> {}", summary.utility, out.display());
    if let Some(a) = summary.argmax_delta {
        println!("argmax delta: {a}");
    }
    if let Some([d, m]) = summary.final_point {
        println!("trajectory end: delta={d} mu={m}");
    }
    for [s, c] in &summary.cost_at_half {
        println!("sigma={s}: cost at delta=0.5 {c}");
    }
    Ok(())
}

//! Experiment configuration: a TOML document with one section per concern,
//! plus dotted `key=value` overrides.

use std::path::{Path, PathBuf};

use advhedge_core::instruments::{LookbackMc, OptionKind, OptionSpec, TRADING_DAYS_PER_YEAR};
use advhedge_core::networks::{Activation, FeatureSet, GeneratorArch, HedgerArch, Squash};
use advhedge_core::risk::{CostSpec, UtilitySpec};
use advhedge_core::simulators::{HestonParams, Model, Simulator};
use advhedge_core::toy_analysis::{Axis, ToyAdversarialConfig, ToyMarket};
use advhedge_core::training::{Objective, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root of every random stream in a run.
    pub seed: u64,
    /// Output directory when `--out` is not given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub option: OptionSection,
    pub utility: UtilitySpec,
    pub cost: CostSpec,
    pub simulator: SimulatorSection,
    pub hedger: HedgerSection,
    pub generator: GeneratorSection,
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub backtest: BacktestSection,
    pub toy: ToySection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            out_dir: None,
            option: OptionSection::default(),
            utility: UtilitySpec::Erm { lambda: 1.0 },
            cost: CostSpec { rate: 1e-4 },
            simulator: SimulatorSection::default(),
            hedger: HedgerSection::default(),
            generator: GeneratorSection::default(),
            train: TrainConfig::default(),
            eval: EvalSection::default(),
            backtest: BacktestSection::default(),
            toy: ToySection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptionSection {
    pub kind: OptionKind,
    pub strike: f64,
    pub maturity_steps: usize,
    pub step_years: f64,
}

impl Default for OptionSection {
    fn default() -> Self {
        OptionSection {
            kind: OptionKind::EuropeanCall,
            strike: 1.0,
            maturity_steps: 20,
            step_years: 1.0 / TRADING_DAYS_PER_YEAR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulatorKind {
    Gbm,
    Heston,
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorSection {
    pub model: SimulatorKind,
    pub s0: f64,
    /// GBM volatility.
    pub sigma: f64,
    pub kappa: f64,
    pub theta: f64,
    pub rho: f64,
    pub sigma_vol: f64,
    pub v0: f64,
}

impl Default for SimulatorSection {
    fn default() -> Self {
        let h = HestonParams::default();
        SimulatorSection {
            model: SimulatorKind::Gbm,
            s0: 1.0,
            sigma: 0.2,
            kappa: h.kappa,
            theta: h.theta,
            rho: h.rho,
            sigma_vol: h.sigma_vol,
            v0: h.v0,
        }
    }
}

impl SimulatorSection {
    pub fn heston(&self) -> HestonParams {
        HestonParams {
            kappa: self.kappa,
            theta: self.theta,
            rho: self.rho,
            sigma_vol: self.sigma_vol,
            v0: self.v0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HedgerSection {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub squash: Squash,
    /// Feed the Black-Scholes delta at `bs_sigma` as an extra input.
    pub bs_delta_feature: bool,
    pub bs_sigma: f64,
    pub running_max: bool,
    /// Permit a lookback hedger without the running-maximum input.
    pub allow_missing_running_max: bool,
}

impl Default for HedgerSection {
    fn default() -> Self {
        let a = HedgerArch::default();
        HedgerSection {
            hidden: a.hidden,
            activation: a.activation,
            squash: a.squash,
            bs_delta_feature: false,
            bs_sigma: 0.2,
            running_max: false,
            allow_missing_running_max: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    pub hidden_dim: usize,
    pub noise_dim: usize,
    pub init_sigma: f64,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        let g = GeneratorArch::default();
        GeneratorSection {
            hidden_dim: g.hidden_dim,
            noise_dim: g.noise_dim,
            init_sigma: g.init_sigma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub trials: usize,
    pub bs_sigma: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            trials: 20,
            bs_sigma: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Hedger,
    BsDelta,
    ZeroHedge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestSection {
    /// Empty means: the hedger when a checkpoint is given, then both
    /// baselines.
    pub strategies: Vec<StrategyKind>,
    pub bs_sigma: f64,
    /// Use the previous window's realised volatility for the BS delta.
    pub realized_sigma: bool,
    pub bins: usize,
    pub lookback_mc_paths: usize,
}

impl Default for BacktestSection {
    fn default() -> Self {
        BacktestSection {
            strategies: Vec::new(),
            bs_sigma: 0.2,
            realized_sigma: false,
            bins: 30,
            lookback_mc_paths: LookbackMc::default().paths,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToySection {
    pub case: u8,
    pub mu: f64,
    pub sigma: f64,
    pub cost: f64,
    pub mc_samples: usize,
    pub delta_lo: f64,
    pub delta_hi: f64,
    pub delta_steps: usize,
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub mu_steps: usize,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub sigma_steps: usize,
    /// Case 2 trajectory.
    pub cycles: usize,
    pub init_delta: f64,
    pub init_mu: f64,
    pub lr_hedger: f64,
    pub lr_generator: f64,
    pub ttur_ratio: usize,
    pub trajectory_mc_samples: usize,
}

impl Default for ToySection {
    fn default() -> Self {
        let t = ToyAdversarialConfig::default();
        ToySection {
            case: 1,
            mu: 0.0,
            sigma: 0.2,
            cost: 1e-4,
            mc_samples: 100_000,
            delta_lo: 0.0,
            delta_hi: 1.0,
            delta_steps: 201,
            mu_lo: -0.3,
            mu_hi: 0.3,
            mu_steps: 13,
            sigma_lo: 0.1,
            sigma_hi: 0.5,
            sigma_steps: 5,
            cycles: t.cycles,
            init_delta: t.init_delta,
            init_mu: t.init_mu,
            lr_hedger: t.lr_hedger,
            lr_generator: t.lr_generator,
            ttur_ratio: t.ttur_ratio,
            trajectory_mc_samples: t.mc_samples,
        }
    }
}

impl ToySection {
    pub fn market(&self) -> ToyMarket {
        ToyMarket {
            s0: 1.0,
            mu: self.mu,
            sigma: self.sigma,
            cost: self.cost,
        }
    }

    pub fn delta_axis(&self) -> Result<Axis, CliError> {
        Axis::new("delta", self.delta_lo, self.delta_hi, self.delta_steps).map_err(field("toy.delta_*"))
    }

    pub fn mu_axis(&self) -> Result<Axis, CliError> {
        Axis::new("mu", self.mu_lo, self.mu_hi, self.mu_steps).map_err(field("toy.mu_*"))
    }

    pub fn sigma_axis(&self) -> Result<Axis, CliError> {
        Axis::new("sigma", self.sigma_lo, self.sigma_hi, self.sigma_steps).map_err(field("toy.sigma_*"))
    }

    pub fn adversarial(&self, utility: UtilitySpec, seed: u64) -> ToyAdversarialConfig {
        ToyAdversarialConfig {
            utility,
            init_delta: self.init_delta,
            init_mu: self.init_mu,
            sigma: self.sigma,
            cost: self.cost,
            cycles: self.cycles,
            lr_hedger: self.lr_hedger,
            lr_generator: self.lr_generator,
            ttur_ratio: self.ttur_ratio,
            mc_samples: self.trajectory_mc_samples,
            seed,
        }
    }
}

fn field<E: std::fmt::Display>(name: &'static str) -> impl Fn(E) -> CliError {
    move |e| CliError::Config(format!("{name}: {e}"))
}

impl ExperimentConfig {
    /// Reads `path` (or starts from defaults) and applies `overrides`
    /// (`section.key=value`, value in TOML syntax or a bare string).
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut doc: toml::Table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(toml::Value::Table(doc))
            .map_err(|e| CliError::Config(format!("{}: {}", e.path(), e.inner())))?;
        Ok(cfg)
    }

    pub fn spec(&self) -> OptionSpec {
        OptionSpec {
            kind: self.option.kind,
            strike: self.option.strike,
            maturity_steps: self.option.maturity_steps,
            step_years: self.option.step_years,
        }
    }

    pub fn objective(&self) -> Objective {
        Objective {
            spec: self.spec(),
            utility: self.utility,
            cost: self.cost,
        }
    }

    pub fn hedger_arch(&self) -> HedgerArch {
        HedgerArch {
            hidden: self.hedger.hidden.clone(),
            activation: self.hedger.activation,
            squash: self.hedger.squash,
            features: FeatureSet {
                bs_delta_sigma: self.hedger.bs_delta_feature.then_some(self.hedger.bs_sigma),
                running_max: self.hedger.running_max,
            },
        }
    }

    pub fn generator_arch(&self) -> GeneratorArch {
        GeneratorArch {
            hidden_dim: self.generator.hidden_dim,
            noise_dim: self.generator.noise_dim,
            init_sigma: self.generator.init_sigma,
            dt: self.option.step_years,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train
        }
    }

    /// The classical simulator, or the Brownian validation model for
    /// adversarial runs.
    pub fn simulator(&self) -> Simulator {
        let model = match self.simulator.model {
            SimulatorKind::Gbm => Model::Gbm {
                sigma: self.simulator.sigma,
            },
            SimulatorKind::Heston => Model::Heston(self.simulator.heston()),
            SimulatorKind::Adversarial => Model::Gbm {
                sigma: self.train.validation_sigma,
            },
        };
        Simulator {
            model,
            s0: self.simulator.s0,
            steps: self.option.maturity_steps,
            dt: self.option.step_years,
        }
    }

    /// Field-level checks, including cross-section consistency.
    pub fn validate(&self) -> Result<(), CliError> {
        self.spec().validate().map_err(field("option"))?;
        self.utility.validate().map_err(field("utility"))?;
        CostSpec::new(self.cost.rate).map_err(field("cost.rate"))?;
        let s = &self.simulator;
        if !(s.s0 > 0.0 && s.s0.is_finite()) {
            return Err(CliError::Config(format!("simulator.s0: {} must be > 0", s.s0)));
        }
        match s.model {
            SimulatorKind::Gbm if !(s.sigma >= 0.0 && s.sigma.is_finite()) => {
                return Err(CliError::Config(format!("simulator.sigma: {} must be >= 0", s.sigma)));
            }
            SimulatorKind::Heston => s.heston().validate().map_err(field("simulator"))?,
            _ => {}
        }
        if self.hedger.hidden.iter().any(|&h| h == 0) {
            return Err(CliError::Config("hedger.hidden: widths must be >= 1".into()));
        }
        if self.hedger.bs_delta_feature && !(self.hedger.bs_sigma > 0.0) {
            return Err(CliError::Config("hedger.bs_sigma: must be > 0".into()));
        }
        if self.option.kind == OptionKind::LookbackCall
            && !self.hedger.running_max
            && !self.hedger.allow_missing_running_max
        {
            return Err(CliError::Config(
                "hedger.running_max: a lookback option needs the running-maximum feature \
                 (or hedger.allow_missing_running_max = true)"
                    .into(),
            ));
        }
        if self.generator.hidden_dim == 0 || self.generator.noise_dim == 0 || !(self.generator.init_sigma > 0.0) {
            return Err(CliError::Config(
                "generator: hidden_dim and noise_dim must be >= 1, init_sigma > 0".into(),
            ));
        }
        self.train_config().validate().map_err(field("train"))?;
        if self.eval.trials == 0 {
            return Err(CliError::Config("eval.trials: must be >= 1".into()));
        }
        if !(self.eval.bs_sigma > 0.0) || !(self.backtest.bs_sigma > 0.0) {
            return Err(CliError::Config("eval.bs_sigma / backtest.bs_sigma: must be > 0".into()));
        }
        if self.backtest.bins == 0 || self.backtest.lookback_mc_paths == 0 {
            return Err(CliError::Config("backtest.bins and backtest.lookback_mc_paths must be >= 1".into()));
        }
        if self.toy.mc_samples == 0 || self.toy.trajectory_mc_samples == 0 {
            return Err(CliError::Config("toy.mc_samples: must be >= 1".into()));
        }
        Ok(())
    }

    /// Canonical TOML of the resolved configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of [`ExperimentConfig::to_toml`], lowercase hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn apply_override(doc: &mut toml::Table, raw: &str) -> Result<(), CliError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{raw}`")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Usage(format!("--set: malformed key `{key}`")));
    }
    let value = parse_value(value.trim());
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().expect("non-empty key");
    let mut table = doc;
    for p in parts {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("--set {key}: `{p}` is not a section")))?;
    }
    table.insert(leaf.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Wrap {
        v: toml::Value,
    }
    match toml::from_str::<Wrap>(&format!("v = {raw}")) {
        Ok(w) => w.v,
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

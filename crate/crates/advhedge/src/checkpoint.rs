//! Versioned JSON checkpoints for the two networks.

use std::path::Path;

use advhedge_core::autodiff::{ParamEntry, ParamStore};
use advhedge_core::instruments::OptionSpec;
use advhedge_core::networks::{GeneratorArch, GeneratorModel, HedgerArch, HedgerPolicy};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const FORMAT: &str = "advhedge-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Hedger,
    Generator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Arch {
    Hedger(HedgerArch),
    Generator(GeneratorArch),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub role: Role,
    pub option: OptionSpec,
    pub arch: Arch,
    /// Epoch (cycle) the weights were taken at.
    pub epoch: usize,
    pub validation_cost: Option<f64>,
    pub entries: Vec<ParamEntry>,
    pub params: Vec<f64>,
}

fn block(store: &ParamStore, range: std::ops::Range<usize>) -> (Vec<ParamEntry>, Vec<f64>) {
    let entries = store
        .entries()
        .iter()
        .filter(|e| e.offset >= range.start && e.offset + e.len() <= range.end)
        .map(|e| ParamEntry {
            offset: e.offset - range.start,
            ..e.clone()
        })
        .collect();
    (entries, store.params()[range].to_vec())
}

impl Checkpoint {
    pub fn hedger(
        policy: &HedgerPolicy,
        store: &ParamStore,
        option: OptionSpec,
        epoch: usize,
        validation_cost: Option<f64>,
    ) -> Self {
        let (entries, params) = block(store, policy.range());
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            role: Role::Hedger,
            option,
            arch: Arch::Hedger(policy.arch().clone()),
            epoch,
            validation_cost,
            entries,
            params,
        }
    }

    /// A hedger checkpoint from raw snapshot weights laid out like `policy`.
    pub fn hedger_snapshot(
        policy: &HedgerPolicy,
        store: &ParamStore,
        option: OptionSpec,
        epoch: usize,
        validation_cost: f64,
        params: &[f64],
    ) -> Self {
        let mut c = Self::hedger(policy, store, option, epoch, Some(validation_cost));
        c.params = params.to_vec();
        c
    }

    pub fn generator(model: &GeneratorModel, store: &ParamStore, option: OptionSpec, epoch: usize) -> Self {
        let (entries, params) = block(store, model.range());
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            role: Role::Generator,
            option,
            arch: Arch::Generator(*model.arch()),
            epoch,
            validation_cost: None,
            entries,
            params,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        crate::report::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read checkpoint {}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let c: Checkpoint = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::Config(format!("{}: {}: {}", path.display(), e.path(), e.inner())))?;
        if c.format != FORMAT || c.version != VERSION {
            return Err(CliError::Config(format!(
                "{}: unsupported checkpoint format {} v{} (expected {FORMAT} v{VERSION})",
                path.display(),
                c.format,
                c.version
            )));
        }
        Ok(c)
    }

    /// Rebuilds the hedger into a fresh store.
    pub fn restore_hedger(&self) -> Result<(HedgerPolicy, ParamStore), CliError> {
        let Arch::Hedger(arch) = &self.arch else {
            return Err(CliError::Config("checkpoint holds a generator, not a hedger".into()));
        };
        let mut store = ParamStore::new();
        let policy = HedgerPolicy::new(arch.clone(), "hedger", &mut store, 0)
            .map_err(CliError::config("checkpoint architecture"))?;
        self.fill(&mut store, policy.range())?;
        Ok((policy, store))
    }

    pub fn restore_generator(&self) -> Result<(GeneratorModel, ParamStore), CliError> {
        let Arch::Generator(arch) = &self.arch else {
            return Err(CliError::Config("checkpoint holds a hedger, not a generator".into()));
        };
        let mut store = ParamStore::new();
        let model = GeneratorModel::new(*arch, "generator", &mut store, 0)
            .map_err(CliError::config("checkpoint architecture"))?;
        self.fill(&mut store, model.range())?;
        Ok((model, store))
    }

    fn fill(&self, store: &mut ParamStore, range: std::ops::Range<usize>) -> Result<(), CliError> {
        let (expected, _) = block(store, range.clone());
        if expected != self.entries || self.params.len() != range.len() {
            return Err(CliError::Config(
                "checkpoint parameter layout does not match its architecture".into(),
            ));
        }
        if let Some(i) = self.params.iter().position(|p| !p.is_finite()) {
            return Err(CliError::Config(format!("checkpoint parameter {i} is not finite")));
        }
        store.params_mut()[range].copy_from_slice(&self.params);
        Ok(())
    }

    /// Checks that a hedger checkpoint can be run under `option` with the
    /// configured architecture, naming the first mismatch.
    pub fn check_compatible(&self, option: &OptionSpec, arch: &HedgerArch) -> Result<(), CliError> {
        let Arch::Hedger(saved) = &self.arch else {
            return Err(CliError::Config("checkpoint holds a generator, not a hedger".into()));
        };
        let mismatch = |what: &str, saved: String, cfg: String| {
            Err(CliError::Config(format!(
                "checkpoint incompatible with config: {what} is {saved} in the checkpoint but {cfg} in the config"
            )))
        };
        if self.option.kind != option.kind {
            return mismatch("option.kind", format!("{:?}", self.option.kind), format!("{:?}", option.kind));
        }
        if self.option.maturity_steps != option.maturity_steps {
            return mismatch(
                "option.maturity_steps",
                self.option.maturity_steps.to_string(),
                option.maturity_steps.to_string(),
            );
        }
        if self.option.strike != option.strike {
            return mismatch("option.strike", self.option.strike.to_string(), option.strike.to_string());
        }
        let (f, g) = (&saved.features, &arch.features);
        if f.running_max != g.running_max {
            return mismatch("feature running_max", f.running_max.to_string(), g.running_max.to_string());
        }
        if f.bs_delta_sigma != g.bs_delta_sigma {
            return mismatch(
                "feature bs_delta",
                format!("{:?}", f.bs_delta_sigma),
                format!("{:?}", g.bs_delta_sigma),
            );
        }
        if saved.hidden != arch.hidden || saved.activation != arch.activation || saved.squash != arch.squash {
            return mismatch("hedger architecture", format!("{saved:?}"), format!("{arch:?}"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use advhedge_core::instruments::OptionKind;
    use advhedge_core::networks::FeatureSet;

    fn small() -> HedgerArch {
        HedgerArch {
            hidden: vec![3, 2],
            ..HedgerArch::default()
        }
    }

    #[test]
    fn hedger_round_trip_is_exact() {
        let mut store = ParamStore::new();
        let h = HedgerPolicy::new(small(), "hedger", &mut store, 7).unwrap();
        let spec = OptionSpec::desk_default(OptionKind::EuropeanCall);
        let c = Checkpoint::hedger(&h, &store, spec, 3, Some(0.1));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        c.save(&p).unwrap();
        let back = Checkpoint::load(&p).unwrap();
        assert_eq!(back, c);
        let (_, s2) = back.restore_hedger().unwrap();
        assert_eq!(s2.params(), store.params());
    }

    #[test]
    fn generator_block_is_rebased() {
        let mut store = ParamStore::new();
        let _h = HedgerPolicy::new(small(), "hedger", &mut store, 1).unwrap();
        let g = GeneratorModel::new(GeneratorArch::default(), "generator", &mut store, 1).unwrap();
        let spec = OptionSpec::desk_default(OptionKind::EuropeanCall);
        let c = Checkpoint::generator(&g, &store, spec, 0);
        assert_eq!(c.entries[0].offset, 0);
        let (g2, s2) = c.restore_generator().unwrap();
        assert_eq!(s2.params(), &store.params()[g.range()]);
        assert_eq!(g2.range().len(), g.range().len());
    }

    #[test]
    fn mismatch_names_the_feature() {
        let mut store = ParamStore::new();
        let h = HedgerPolicy::new(small(), "hedger", &mut store, 1).unwrap();
        let spec = OptionSpec::desk_default(OptionKind::EuropeanCall);
        let c = Checkpoint::hedger(&h, &store, spec, 0, None);
        let mut other = small();
        other.features = FeatureSet {
            bs_delta_sigma: None,
            running_max: true,
        };
        let msg = c.check_compatible(&spec, &other).unwrap_err().to_string();
        assert!(msg.contains("running_max"), "{msg}");
        let look = OptionSpec::desk_default(OptionKind::LookbackCall);
        let msg = c.check_compatible(&look, &small()).unwrap_err().to_string();
        assert!(msg.contains("option.kind"), "{msg}");
        c.check_compatible(&spec, &small()).unwrap();
    }
}

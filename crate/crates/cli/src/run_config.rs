//! The TOML document driving `shapley-select loop`.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use shapley_select::{
    generate_scenario, load_dataset, Error, FeatureDataset, LoopConfig, MethodConfig, RegressionConfig, Result,
    ScenarioSpec, SplitAssignment, SplitSizes, UtilitySpec,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Manifest of a saved dataset; exclusive with `scenario`.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub scenario: Option<ScenarioSpec>,
    /// Split sizes for a generated scenario.
    #[serde(default)]
    pub sizes: Option<SplitSizes>,
    #[serde(default = "one")]
    pub repeats: usize,
    pub run: RunSettings,
    pub methods: Vec<MethodConfig>,
    pub output: OutputPaths,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

/// Loop settings shared by every method.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub initial_pool_size: usize,
    pub batch_size: usize,
    pub num_rounds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub record_timings: bool,
    #[serde(default)]
    pub utility: UtilitySpec,
    #[serde(default)]
    pub regression: RegressionConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub json: PathBuf,
    pub csv: PathBuf,
}

impl RunConfig {
    /// Parses `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(d) = cfg.dataset.as_mut() {
            resolve(d);
        }
        resolve(&mut cfg.output.json);
        resolve(&mut cfg.output.csv);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        match (&self.dataset, &self.scenario) {
            (Some(_), Some(_)) => return Err(Error::Validation("set either `dataset` or `scenario`, not both".into())),
            (None, None) => return Err(Error::Validation("one of `dataset` or `scenario` is required".into())),
            (Some(path), None) if !path.is_file() => {
                return Err(Error::Validation(format!("dataset manifest {} does not exist", path.display())))
            }
            (None, Some(_)) if self.sizes.is_none() => {
                return Err(Error::Validation("a generated scenario needs `sizes`".into()))
            }
            _ => {}
        }
        if self.methods.is_empty() {
            return Err(Error::Validation("`methods` must list at least one method".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Validation("repeats must be at least 1".into()));
        }
        for out in [&self.output.json, &self.output.csv] {
            let dir = out.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            if !dir.is_dir() {
                return Err(Error::Validation(format!("output directory {} does not exist", dir.display())));
            }
        }
        for cfg in self.loop_configs() {
            cfg.validate()?;
        }
        Ok(())
    }

    pub fn loop_configs(&self) -> Vec<LoopConfig> {
        self.methods
            .iter()
            .map(|method| LoopConfig {
                initial_pool_size: self.run.initial_pool_size,
                batch_size: self.run.batch_size,
                num_rounds: self.run.num_rounds,
                method: method.clone(),
                utility: self.run.utility,
                regression: self.run.regression,
                seed: self.run.seed,
                record_timings: self.run.record_timings,
            })
            .collect()
    }

    pub fn data(&self) -> Result<(FeatureDataset, SplitAssignment)> {
        match (&self.dataset, &self.scenario, self.sizes) {
            (Some(path), _, _) => load_dataset(path),
            (None, Some(spec), Some(sizes)) => {
                let g = generate_scenario(spec, sizes)?;
                Ok((g.dataset, g.splits))
            }
            _ => Err(Error::Validation("no data source configured".into())),
        }
    }
}

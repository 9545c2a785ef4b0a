use std::path::{Path, PathBuf};

use hemoforge::analysis::StagingBands;
use hemoforge::cohort::PopulationStats;
use hemoforge::hemonet::ArterialNetwork;
use hemoforge::neuro::{Feature, TrainConfig};
use hemoforge::pulse1d::SolverConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const ENV_PREFIX: &str = "HEMOFORGE_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortOptions {
    pub n_clinical: usize,
    pub n_lhs: usize,
    /// Half-width of the admissible band in population standard deviations.
    pub filter_k: f64,
}

impl Default for CohortOptions {
    fn default() -> Self {
        CohortOptions {
            n_clinical: 400,
            n_lhs: 100,
            filter_k: 1.96,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    pub sensitivity_grid: usize,
    pub contour_grid: usize,
    pub contour_pairs: Vec<(Feature, Feature)>,
    pub isosurface_resolution: usize,
    pub uniqueness_grid: usize,
    pub bands: StagingBands,
    /// Also write SVG heatmaps next to the CSV grids.
    pub svg: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        use Feature::*;
        AnalysisOptions {
            sensitivity_grid: 21,
            contour_grid: 41,
            contour_pairs: vec![(Co, LambdaRt), (Co, LambdaC), (LambdaRt, LambdaC), (Hr, Co)],
            isosurface_resolution: 30,
            uniqueness_grid: 30,
            bands: StagingBands::default(),
            svg: false,
        }
    }
}

/// Everything a pipeline run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Arterial network JSON; the bundled tree when absent.
    pub network: Option<PathBuf>,
    /// Population statistics JSON; built-in defaults when absent.
    pub stats: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Worker threads for cohort simulation; all cores when absent.
    pub jobs: Option<usize>,
    pub cohort: CohortOptions,
    pub solver: SolverConfig,
    pub train: TrainConfig,
    pub analysis: AnalysisOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            network: None,
            stats: None,
            output_dir: PathBuf::from("hemoforge-out"),
            seed: 2024,
            jobs: None,
            cohort: CohortOptions::default(),
            solver: SolverConfig::default(),
            train: TrainConfig::default(),
            analysis: AnalysisOptions::default(),
        }
    }
}

impl RunConfig {
    /// Defaults, overlaid with `path` (if any), overlaid with `HEMOFORGE_*`
    /// environment variables.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let cfg: RunConfig = load_layered(path, &[], std::env::vars())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.solver.validate()?;
        self.train.validate()?;
        for p in [&self.network, &self.stats].into_iter().flatten() {
            if !p.is_file() {
                return Err(CliError::config(format!("{}: file not found", p.display())));
            }
        }
        if self.cohort.n_clinical + self.cohort.n_lhs == 0 {
            return Err(CliError::config("cohort size must be > 0"));
        }
        if !(self.cohort.filter_k > 0.0) {
            return Err(CliError::config("cohort.filter_k must be > 0"));
        }
        if self.jobs == Some(0) {
            return Err(CliError::config("jobs must be >= 1"));
        }
        Ok(())
    }

    pub fn network(&self) -> CliResult<ArterialNetwork> {
        Ok(match &self.network {
            Some(p) => ArterialNetwork::load(p)?,
            None => ArterialNetwork::reference(),
        })
    }

    pub fn population(&self) -> CliResult<PopulationStats> {
        Ok(match &self.stats {
            Some(p) => PopulationStats::load(p)?,
            None => PopulationStats::default(),
        })
    }

    pub fn jobs(&self) -> usize {
        self.jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

/// A `TrainConfig` file with `HEMOFORGE_TRAIN__*` overrides.
pub fn load_train_config(path: Option<&Path>) -> CliResult<TrainConfig> {
    let cfg: TrainConfig = load_layered(path, &["train"], std::env::vars())?;
    cfg.validate()?;
    Ok(cfg)
}

/// Serializes `T::default()`, merges the JSON file at `path` on top, then
/// applies environment overrides. `HEMOFORGE_A__B=v` sets key `b` of object
/// `a`; only variables under `scope` are considered and the scope is
/// stripped. Values parse as JSON when they can, else as strings.
pub fn load_layered<T>(path: Option<&Path>, scope: &[&str], env: impl Iterator<Item = (String, String)>) -> CliResult<T>
where
    T: Default + Serialize + DeserializeOwned,
{
    let mut value = serde_json::to_value(T::default())?;
    if let Some(path) = path {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let file: Value =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        merge(&mut value, file);
    }
    let mut overrides: Vec<(Vec<String>, String)> = env
        .filter_map(|(k, v)| {
            let rest = k.strip_prefix(ENV_PREFIX)?;
            let keys: Vec<String> = rest.split("__").map(str::to_ascii_lowercase).collect();
            let inner = keys.strip_prefix(scope.iter().map(|s| s.to_string()).collect::<Vec<_>>().as_slice())?;
            (!inner.is_empty()).then(|| (inner.to_vec(), v))
        })
        .collect();
    overrides.sort();
    for (keys, raw) in overrides {
        let parsed = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        set_path(&mut value, &keys, parsed)?;
    }
    serde_json::from_value(value).map_err(|e| CliError::config(format!("configuration: {e}")))
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn set_path(root: &mut Value, keys: &[String], v: Value) -> CliResult<()> {
    let mut node = root;
    for k in &keys[..keys.len() - 1] {
        node = node
            .as_object_mut()
            .and_then(|o| o.get_mut(k))
            .ok_or_else(|| CliError::config(format!("environment override: unknown key '{}'", keys.join("."))))?;
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| CliError::config(format!("environment override: '{}' is not a section", keys.join("."))))?;
    obj.insert(keys[keys.len() - 1].clone(), v);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> impl Iterator<Item = (String, String)> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect::<Vec<_>>()
            .into_iter()
    }

    #[test]
    fn defaults_round_trip() {
        let cfg: RunConfig = load_layered(None, &[], env(&[])).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn file_then_environment() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"seed": 7, "train": {"epochs": 10}, "cohort": {"n_lhs": 3}}"#).unwrap();
        let cfg: RunConfig = load_layered(
            Some(&path),
            &[],
            env(&[
                ("HEMOFORGE_TRAIN__EPOCHS", "25"),
                ("HEMOFORGE_OUTPUT_DIR", "/tmp/x"),
                ("UNRELATED", "1"),
            ]),
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.train.epochs, 25);
        assert_eq!(cfg.cohort.n_lhs, 3);
        assert_eq!(cfg.cohort.n_clinical, 400);
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/x"));
    }

    #[test]
    fn scoped_train_overrides() {
        let cfg: TrainConfig = load_layered(None, &["train"], env(&[("HEMOFORGE_TRAIN__SEED", "5"), ("HEMOFORGE_SEED", "9")])).unwrap();
        assert_eq!(cfg.seed, 5);
    }

    #[test]
    fn unknown_keys_are_configuration_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"sed": 7}"#).unwrap();
        let err = load_layered::<RunConfig>(Some(&path), &[], env(&[])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(load_layered::<RunConfig>(None, &[], env(&[("HEMOFORGE_NOPE__X", "1")])).is_err());
    }

    #[test]
    fn missing_network_named_in_error() {
        let cfg = RunConfig {
            network: Some(PathBuf::from("/nonexistent/net.json")),
            ..RunConfig::default()
        };
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.message.contains("/nonexistent/net.json"));
    }
}

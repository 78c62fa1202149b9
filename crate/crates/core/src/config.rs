//! TOML configuration: dish dimensions, gripper, time model, policy options
//! and the experiment plan. Every section is optional.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{ActionModel, GripperSpec};
use crate::harness::ExperimentPlan;
use crate::metrics::TimeModel;
use crate::policy::{PairSelection, PolicyConfig, PolicyKind, UtensilStacking};
use crate::tableware::{DishTable, SceneGenerator, Workspace};

/// Environment variable naming a config file.
pub const CONFIG_ENV: &str = "DECLUTTER_CONFIG";
/// Config file picked up from the working directory.
pub const LOCAL_CONFIG: &str = "declutter.toml";

/// Bundled defaults, including the fitted time model.
pub const DEFAULT_CONFIG: &str = include_str!("../../../config/default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyOptions {
    pub utensil_stacking: UtensilStacking,
    pub pair_selection: PairSelection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub workspace: Workspace,
    pub dishes: DishTable,
    pub gripper: GripperSpec,
    /// Clearance beyond the mover's outline that a pull path must keep free.
    pub corridor_margin: f64,
    pub time_model: TimeModel,
    pub policy: PolicyOptions,
    pub plan: ExperimentPlan,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            workspace: Workspace::default(),
            dishes: DishTable::default(),
            gripper: GripperSpec::default(),
            corridor_margin: 1.0,
            time_model: TimeModel::default(),
            policy: PolicyOptions::default(),
            plan: ExperimentPlan::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg = Self::from_toml(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source: Box::new(source),
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Picks the config file: `explicit`, then `$DECLUTTER_CONFIG`, then
    /// `declutter.toml` in `cwd`. Returns `None` when none applies.
    pub fn locate(explicit: Option<&Path>, env: Option<&str>, cwd: &Path) -> Option<PathBuf> {
        if let Some(p) = explicit {
            return Some(p.to_path_buf());
        }
        if let Some(p) = env.filter(|p| !p.is_empty()) {
            return Some(PathBuf::from(p));
        }
        let local = cwd.join(LOCAL_CONFIG);
        local.is_file().then_some(local)
    }

    /// Loads the located config, or the defaults when there is none.
    pub fn resolve(explicit: Option<&Path>) -> Result<(Self, Option<PathBuf>), ConfigError> {
        let env = std::env::var(CONFIG_ENV).ok();
        let cwd = std::env::current_dir().unwrap_or_else(|_| PathBuf::from("."));
        match Self::locate(explicit, env.as_deref(), &cwd) {
            Some(path) => Ok((Self::load(&path)?, Some(path))),
            None => Ok((Self::default(), None)),
        }
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        if !(self.workspace.width > 0.0 && self.workspace.height > 0.0) {
            return bad("workspace dimensions must be positive");
        }
        if !self.dishes.is_valid() {
            return bad("dish dimensions must be positive, with utensil length >= width");
        }
        if !self.gripper.is_valid() {
            return bad("gripper dimensions must be positive, with closed width below the opening");
        }
        if !(self.corridor_margin.is_finite() && self.corridor_margin >= 0.0) {
            return bad("corridor_margin must be non-negative");
        }
        if !self.time_model.is_valid() {
            return bad("time model parameters must be non-negative");
        }
        self.plan.check().map_err(ConfigError::Invalid)
    }

    pub fn model(&self) -> ActionModel {
        ActionModel::new(self.dishes, self.gripper, self.corridor_margin)
    }

    pub fn generator(&self) -> SceneGenerator {
        SceneGenerator::new(self.workspace, self.dishes)
    }

    pub fn policy_config(&self, kind: PolicyKind) -> PolicyConfig {
        PolicyConfig {
            kind,
            utensil_stacking: self.policy.utensil_stacking,
            pair_selection: self.policy.pair_selection,
        }
    }
}

/// `[time_model]` section ready to paste into a config file.
pub fn time_model_fragment(tm: &TimeModel) -> String {
    #[derive(Serialize)]
    struct Fragment<'a> {
        time_model: &'a TimeModel,
    }
    toml::to_string(&Fragment { time_model: tm }).expect("time model serializes")
}

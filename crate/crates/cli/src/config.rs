//! TOML run configuration.
//!
//! ```toml
//! version = 1
//! case = "poisson_square"      # or a [problem] table
//! mode = "forward"             # forward | inverse-soft | inverse-hard | oracle
//! lambda = 1000.0
//! out = "runs/poisson"
//!
//! [train]
//! iterations = 3000
//! learning_rate = 1e-3
//! seed = 1
//! ```
//!
//! A custom problem replaces `case`:
//!
//! ```toml
//! [problem]
//! mesh = "plate.mesh"          # relative to the config file
//! model = "elasticity"         # poisson | elasticity | navier_stokes | stokes
//! params = [{ value = 1.0 }, { value = 1.0, trainable = true }]
//!
//! [[problem.essential]]
//! target = { tag = "left" }
//! component = 0
//! value = { type = "constant", value = 0.0 }
//!
//! [[problem.natural]]
//! tag = "right"
//! flux = { traction = [0.5, 0.0] }
//!
//! [[problem.observations]]
//! component = 0
//! node = 12
//! value = 0.031
//! ```

use std::path::{Path, PathBuf};

use galerkin_gcn::mesh::io::read_mesh;
use galerkin_gcn::mesh::{EssentialBc, Observation, TrainableBc};
use galerkin_gcn::physics::Model;
use galerkin_gcn::problem::{ParamSpec, ProblemSpec};
use galerkin_gcn::residual::NaturalBc;
use galerkin_gcn::training::TrainConfig;
use galerkin_gcn::{Error, Result};
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

fn version() -> u32 {
    CONFIG_VERSION
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "version")]
    pub version: u32,
    pub case: Option<String>,
    pub problem: Option<ProblemConfig>,
    pub mode: Option<String>,
    pub lambda: Option<f64>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub train: TrainOverrides,
}

/// Optional overrides of a case's default training configuration.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub iterations: Option<usize>,
    pub learning_rate: Option<f64>,
    pub unknowns_learning_rate: Option<f64>,
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
    pub decay_at: Option<Vec<f64>>,
    pub decay_factor: Option<f64>,
    pub cheb_order: Option<usize>,
    pub hidden: Option<Vec<usize>>,
}

impl TrainOverrides {
    pub fn apply(&self, cfg: &mut TrainConfig) {
        if let Some(v) = self.iterations {
            cfg.iterations = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.unknowns_learning_rate {
            cfg.unknowns_learning_rate = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if self.tolerance.is_some() {
            cfg.tolerance = self.tolerance;
        }
        if let Some(v) = &self.decay_at {
            cfg.decay_at = v.clone();
        }
        if let Some(v) = self.decay_factor {
            cfg.decay_factor = v;
        }
        if let Some(v) = self.cheb_order {
            cfg.cheb_order = v;
        }
        if let Some(v) = &self.hidden {
            cfg.hidden = v.clone();
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub mesh: PathBuf,
    pub model: String,
    pub params: Vec<ParamSpec>,
    #[serde(default)]
    pub essential: Vec<EssentialBc>,
    #[serde(default)]
    pub natural: Vec<NaturalBc>,
    #[serde(default)]
    pub trainable: Vec<TrainableBc>,
    #[serde(default)]
    pub observations: Vec<Observation>,
}

pub fn parse_model(name: &str) -> Result<Model> {
    match name {
        "poisson" => Ok(Model::Poisson),
        "elasticity" => Ok(Model::Elasticity),
        "navier_stokes" => Ok(Model::NavierStokes { convection: true }),
        "stokes" => Ok(Model::NavierStokes { convection: false }),
        _ => Err(Error::Config(format!(
            "unknown model `{name}`; expected poisson, elasticity, navier_stokes or stokes"
        ))),
    }
}

impl ProblemConfig {
    /// Builds the problem; `base` is the directory relative paths start from.
    pub fn build(&self, base: &Path) -> Result<ProblemSpec> {
        let path = base.join(&self.mesh);
        if !path.is_file() {
            return Err(Error::Config(format!("mesh file `{}` does not exist", path.display())));
        }
        let mesh = read_mesh(&path)?;
        let mut spec = ProblemSpec::new(mesh, parse_model(&self.model)?, self.params.clone());
        spec.essential = self.essential.clone();
        spec.natural = self.natural.clone();
        spec.trainable_bc = self.trainable.clone();
        spec.observations = self.observations.clone();
        // Surfaces every dof-map and parameter error before training starts.
        spec.assembler()?;
        Ok(spec)
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config `{}`: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.case.is_some() && self.problem.is_some() {
            return Err(Error::Config("give either `case` or `[problem]`, not both".into()));
        }
        if let Some(l) = self.lambda {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::Config(format!("lambda = {l} must be finite and non-negative")));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }
}

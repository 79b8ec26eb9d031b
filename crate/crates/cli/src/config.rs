//! TOML run configuration. Relative paths resolve against the config file's
//! directory (fixture files against `paths.fixtures` when set). Credentials
//! are never stored here, only the names of the environment variables that
//! hold them.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use geovista_core::agent::LoopConfig;
use geovista_core::chat::{ChatEndpoint, HttpPolicy, PolicyClient, SamplingParams, ScriptedPolicy};
use geovista_core::reward::DEFAULT_BETA;
use geovista_core::tools::{
    CachedSearch, FixtureGeocoder, FixtureSearch, Geocoder, HttpEndpoint, HttpGeocoder, HttpSearch, SearchProvider,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub deterministic: bool,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Rollouts per sample; consecutive trajectories of a sample form a group.
    #[serde(default = "default_group_size")]
    pub group_size: usize,
    #[serde(default)]
    pub question: Option<String>,
    pub paths: Paths,
    pub policy: ModelConfig,
    #[serde(default)]
    pub sampling: SamplingParams,
    #[serde(default, rename = "loop")]
    pub loop_config: LoopConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub geocode: Option<GeocodeConfig>,
    #[serde(default)]
    pub verifier: Option<ModelConfig>,
    #[serde(default)]
    pub extractor: Option<ModelConfig>,
    #[serde(default)]
    pub judge: Option<ModelConfig>,
    #[serde(default)]
    pub proposer: Option<ModelConfig>,
    #[serde(default)]
    pub curation: CurationConfig,
}

fn default_workers() -> usize {
    4
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

fn default_group_size() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub manifest: PathBuf,
    pub out: PathBuf,
    #[serde(default)]
    pub fixtures: Option<PathBuf>,
}

/// A chat model: canned replies from a script file, or a live endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Scripted { script: PathBuf },
    Http(ChatEndpoint),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchConfig {
    #[default]
    None,
    Fixture {
        file: PathBuf,
    },
    Http {
        #[serde(flatten)]
        endpoint: HttpEndpoint,
        #[serde(default)]
        cache_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeocodeConfig {
    Fixture { file: PathBuf },
    Http(HttpEndpoint),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurationConfig {
    #[serde(default = "default_turn_budget")]
    pub turn_budget: usize,
    /// Report curated answers that miss the labelled city.
    #[serde(default = "default_true")]
    pub lint_answers: bool,
}

fn default_turn_budget() -> usize {
    4
}

fn default_true() -> bool {
    true
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self { turn_budget: default_turn_budget(), lint_answers: true }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub deterministic: bool,
}

impl RunConfig {
    /// Reads, resolves and validates a config file. Fails before any network
    /// access if a referenced file is missing.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: RunConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        config.apply(overrides);
        config.resolve(base);
        config.validate()?;
        Ok(config)
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(m) = &o.manifest {
            self.paths.manifest = m.clone();
        }
        if let Some(out) = &o.out {
            self.paths.out = out.clone();
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        self.deterministic |= o.deterministic;
        self.loop_config.deterministic = self.deterministic;
        self.sampling.seed = Some(self.seed);
    }

    fn resolve(&mut self, base: &Path) {
        let abs = |p: &mut PathBuf, root: &Path| {
            if p.is_relative() {
                *p = root.join(&*p);
            }
        };
        abs(&mut self.paths.manifest, base);
        abs(&mut self.paths.out, base);
        if let Some(f) = &mut self.paths.fixtures {
            abs(f, base);
        }
        let fixtures = self.paths.fixtures.clone().unwrap_or_else(|| base.to_path_buf());
        for model in [
            Some(&mut self.policy),
            self.verifier.as_mut(),
            self.extractor.as_mut(),
            self.judge.as_mut(),
            self.proposer.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            if let ModelConfig::Scripted { script } = model {
                abs(script, &fixtures);
            }
        }
        match &mut self.search {
            SearchConfig::Fixture { file } => abs(file, &fixtures),
            SearchConfig::Http { cache_dir: Some(dir), .. } => abs(dir, base),
            _ => {}
        }
        if let Some(GeocodeConfig::Fixture { file }) = &mut self.geocode {
            abs(file, &fixtures);
        }
    }

    fn validate(&self) -> Result<()> {
        self.loop_config.validate()?;
        if self.workers < 1 {
            bail!("workers must be at least 1");
        }
        if self.group_size < 1 {
            bail!("group_size must be at least 1");
        }
        if !(self.beta.is_finite() && self.beta > 1.0) {
            bail!("beta must be greater than 1, got {}", self.beta);
        }
        if self.curation.turn_budget < 1 {
            bail!("curation.turn_budget must be at least 1");
        }
        let mut files = vec![("manifest", &self.paths.manifest)];
        if let Some(f) = &self.paths.fixtures {
            files.push(("fixtures directory", f));
        }
        for (name, model) in [
            ("policy", Some(&self.policy)),
            ("verifier", self.verifier.as_ref()),
            ("extractor", self.extractor.as_ref()),
            ("judge", self.judge.as_ref()),
            ("proposer", self.proposer.as_ref()),
        ] {
            if let Some(ModelConfig::Scripted { script }) = model {
                files.push((name, script));
            }
        }
        if let SearchConfig::Fixture { file } = &self.search {
            files.push(("search fixture", file));
        }
        if let Some(GeocodeConfig::Fixture { file }) = &self.geocode {
            files.push(("geocode fixture", file));
        }
        for (name, path) in files {
            if !path.exists() {
                bail!("{name} path {} does not exist", path.display());
            }
        }
        Ok(())
    }

    /// SHA-256 of the resolved configuration. The worker count does not
    /// change results and is left out.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.workers = 0;
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn search_provider(&self) -> Result<Option<Arc<dyn SearchProvider>>> {
        Ok(match &self.search {
            SearchConfig::None => None,
            SearchConfig::Fixture { file } => Some(Arc::new(
                FixtureSearch::from_file(file).with_context(|| format!("search fixture {}", file.display()))?,
            )),
            SearchConfig::Http { endpoint, cache_dir } => {
                let live = HttpSearch::new(endpoint)?;
                match cache_dir {
                    Some(dir) => Some(Arc::new(CachedSearch::new(live, dir)?)),
                    None => Some(Arc::new(live)),
                }
            }
        })
    }

    pub fn geocoder(&self) -> Result<Geocoder> {
        let Some(cfg) = &self.geocode else { bail!("no [geocode] section in the config") };
        Ok(match cfg {
            GeocodeConfig::Fixture { file } => Geocoder::new(Arc::new(
                FixtureGeocoder::from_file(file).with_context(|| format!("geocode fixture {}", file.display()))?,
            )),
            GeocodeConfig::Http(endpoint) => Geocoder::new(Arc::new(HttpGeocoder::new(endpoint)?)),
        })
    }
}

impl ModelConfig {
    pub fn client(&self) -> Result<Arc<dyn PolicyClient>> {
        Ok(match self {
            ModelConfig::Scripted { script } => Arc::new(
                ScriptedPolicy::from_file(script).with_context(|| format!("policy script {}", script.display()))?,
            ),
            ModelConfig::Http(endpoint) => Arc::new(HttpPolicy::new(endpoint)?),
        })
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use cvqkd::channel::{ChannelModel, ModulationSpec};
use cvqkd::distill::{DEFAULT_BETA, DEFAULT_MARGIN, DEFAULT_VERIFICATION_BITS, MIN_BLOCK_LENGTH};
use cvqkd::mathcore::Probability;
use cvqkd::slicing::{default_equiprobable_spec, SliceSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// `(e_b, e_p)` per slice.
pub type ErrorRates = Vec<(Probability<f64>, Probability<f64>)>;

/// One loss value or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Losses {
    One(f64),
    Many(Vec<f64>),
}

impl Losses {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Losses::One(v) => vec![*v],
            Losses::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SliceSource {
    /// Equiprobable cells with this many slices.
    Equiprobable(usize),
    /// A slice spec document, or a file whose `spec` field is one.
    File(PathBuf),
    Inline(SliceSpec<f64>),
}

impl Default for SliceSource {
    fn default() -> Self {
        SliceSource::Equiprobable(2)
    }
}

fn default_variance() -> f64 {
    31.0
}
fn default_block_length() -> usize {
    16384
}
fn default_frames() -> usize {
    100
}
fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_margin() -> usize {
    DEFAULT_MARGIN
}
fn default_verification_bits() -> usize {
    DEFAULT_VERIFICATION_BITS
}
fn default_max_iterations() -> usize {
    cvqkd::distill::MAX_BP_ITERATIONS
}
fn default_samples() -> usize {
    100_000
}
fn default_cutoff_n_max() -> u32 {
    400
}
fn default_cutoff_epsilon() -> f64 {
    1e-3
}
fn default_max_evaluations() -> usize {
    200
}
fn default_tolerance() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_variance")]
    pub variance: f64,
    pub loss_db: Losses,
    #[serde(default)]
    pub excess_noise: f64,
    #[serde(default)]
    pub slices: SliceSource,
    #[serde(default = "default_block_length")]
    pub block_length: usize,
    #[serde(default = "default_frames")]
    pub frames: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_margin")]
    pub margin: usize,
    #[serde(default = "default_verification_bits")]
    pub verification_bits: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Bob receives Alice's values unchanged.
    #[serde(default)]
    pub noiseless: bool,
    /// `[e_b, e_p]` per slice for code sizing and hashing; computed from
    /// the channel when absent.
    #[serde(default)]
    pub error_rates: Option<Vec<[f64; 2]>>,
    /// Estimation samples `n`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_cutoff_n_max")]
    pub cutoff_n_max: u32,
    #[serde(default = "default_cutoff_epsilon")]
    pub cutoff_epsilon: f64,
    #[serde(default = "default_max_evaluations")]
    pub max_evaluations: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Affects wall time only, so it is left out of the config hash.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing)]
    pub out_dir: Option<PathBuf>,
}

/// A parsed config with its slice spec resolved and overrides applied.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub spec: SliceSpec<f64>,
    pub seed: u64,
    pub hash: String,
}

impl Resolved {
    pub fn modulation(&self) -> ModulationSpec<f64> {
        ModulationSpec::new(self.config.variance).expect("validated")
    }

    /// The single loss required by every workflow except `rates`.
    pub fn single_loss(&self) -> Result<f64, CliError> {
        match self.config.loss_db.values().as_slice() {
            [v] => Ok(*v),
            other => Err(CliError::config(
                "loss_db",
                format!("this command takes a single loss, got {}", other.len()),
            )),
        }
    }

    pub fn channel(&self, loss_db: f64) -> ChannelModel<f64> {
        let eta = ChannelModel::<f64>::from_loss_db(loss_db)
            .expect("validated")
            .transmittance;
        ChannelModel::new(eta, self.config.excess_noise).expect("validated")
    }

    pub fn error_rates(&self) -> Option<ErrorRates> {
        self.config.error_rates.as_ref().map(|rates| {
            rates
                .iter()
                .map(|&[b, p]| {
                    (
                        Probability::new(b).expect("validated"),
                        Probability::new(p).expect("validated"),
                    )
                })
                .collect()
        })
    }
}

fn parse<T: serde::de::DeserializeOwned>(text: &str, origin: &Path) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config {
            path: (path != ".").then_some(path),
            message: format!("{}: {}", origin.display(), e.inner()),
        }
    })
}

fn load_spec_file(path: &Path) -> Result<SliceSpec<f64>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config("slices.file", format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = parse(&text, path)?;
    let doc = match value.get("spec") {
        Some(inner) => inner.clone(),
        None => value,
    };
    serde_json::from_value(doc)
        .map_err(|e| CliError::config("slices.file", format!("{}: {e}", path.display())))
}

fn check(ok: bool, path: &str, message: impl Into<String>) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(path, message))
    }
}

fn validate(c: &ExperimentConfig) -> Result<(), CliError> {
    check(
        c.variance.is_finite() && c.variance > 0.0,
        "variance",
        "must be positive",
    )?;
    let losses = c.loss_db.values();
    check(!losses.is_empty(), "loss_db", "empty loss list")?;
    check(
        losses.iter().all(|l| l.is_finite() && *l >= 0.0),
        "loss_db",
        "losses must be finite and non-negative",
    )?;
    check(
        c.excess_noise.is_finite() && c.excess_noise >= 0.0,
        "excess_noise",
        "must be non-negative",
    )?;
    check(
        c.block_length >= MIN_BLOCK_LENGTH,
        "block_length",
        format!("must be at least {MIN_BLOCK_LENGTH}"),
    )?;
    check(c.frames > 0, "frames", "must be positive")?;
    check(
        c.beta.is_finite() && c.beta >= 0.0,
        "beta",
        "must be non-negative",
    )?;
    check(c.max_iterations > 0, "max_iterations", "must be positive")?;
    check(c.samples > 0, "samples", "must be positive")?;
    check(
        c.cutoff_epsilon > 0.0 && c.cutoff_epsilon < 1.0,
        "cutoff_epsilon",
        "must lie in (0, 1)",
    )?;
    check(c.max_evaluations > 0, "max_evaluations", "must be positive")?;
    check(c.tolerance > 0.0, "tolerance", "must be positive")?;
    check(c.workers != Some(0), "workers", "must be positive")?;
    if let Some(rates) = &c.error_rates {
        check(
            rates.iter().flatten().all(|p| (0.0..=1.0).contains(p)),
            "error_rates",
            "rates must lie in [0, 1]",
        )?;
        check(
            rates.iter().all(|r| r[0] < 0.5),
            "error_rates",
            "bit error rates must be below 0.5",
        )?;
    }
    Ok(())
}

fn config_hash(config: &ExperimentConfig, spec: &SliceSpec<f64>, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(config).expect("config serialises"));
    h.update(serde_json::to_vec(spec).expect("spec serialises"));
    h.update(seed.to_le_bytes());
    let digest = h.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads, validates and resolves a config file. `seed` overrides the file.
pub fn load(path: &Path, seed: Option<u64>, workers: Option<usize>) -> Result<Resolved, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config_file(format!("{}: {e}", path.display())))?;
    let mut config: ExperimentConfig = parse(&text, path)?;
    if workers.is_some() {
        config.workers = workers;
    }
    if seed.is_some() {
        config.seed = seed;
    }
    validate(&config)?;
    let seed = config.seed.ok_or_else(|| {
        CliError::config("seed", "a seed is required (in the config or via --seed)")
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let spec = match &config.slices {
        SliceSource::Equiprobable(m) => {
            check(
                (1..=8).contains(m),
                "slices.equiprobable",
                "slice count must be in 1..=8",
            )?;
            default_equiprobable_spec(*m, config.variance)
                .map_err(|e| CliError::config("slices", e.to_string()))?
        }
        SliceSource::File(p) => load_spec_file(&base.join(p))?,
        SliceSource::Inline(spec) => spec.clone(),
    };
    check(
        (spec.variance() - config.variance).abs() <= 1e-9 * config.variance,
        "slices",
        format!(
            "slice spec variance {} differs from variance {}",
            spec.variance(),
            config.variance
        ),
    )?;
    if let Some(rates) = &config.error_rates {
        check(
            rates.len() == spec.m(),
            "error_rates",
            format!("{} entries for {} slices", rates.len(), spec.m()),
        )?;
    }
    let hash = config_hash(&config, &spec, seed);
    Ok(Resolved {
        config,
        spec,
        seed,
        hash,
    })
}

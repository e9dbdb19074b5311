//! Flat `key=value` config files for training runs.
//!
//! Lines are `key = value` (spaces optional), `#` starts a comment, blank
//! lines are ignored. Every key maps onto one [`ModelConfig`] field; unknown
//! keys are rejected by name so typos surface immediately.

use std::fs;
use std::path::Path;

use sphere_kge::model::ModelConfig;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn apply_line(config: &mut ModelConfig, key: &str, value: &str) -> Result<(), ConfigError> {
    fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
        value
            .parse()
            .map_err(|_| ConfigError(format!("bad value for `{key}`: `{value}`")))
    }
    match key {
        "k" => config.k = parse(key, value)?,
        "n_blocks" => config.n_blocks = parse(key, value)?,
        "gamma" => config.gamma = parse(key, value)?,
        "alpha" => config.alpha = parse(key, value)?,
        "beta" => config.beta = parse(key, value)?,
        "p_norm" => config.p_norm = parse(key, value)?,
        "adv_temperature" => config.adv_temperature = parse(key, value)?,
        "learning_rate" => config.learning_rate = parse(key, value)?,
        "neg_count" => config.neg_count = parse(key, value)?,
        "batch_size" => config.batch_size = parse(key, value)?,
        "steps" => config.steps = parse(key, value)?,
        "seed" => config.seed = parse(key, value)?,
        "rmp_threshold" => config.rmp_threshold = parse(key, value)?,
        "reflections" => config.reflections = parse(key, value)?,
        "log_every" => config.log_every = parse(key, value)?,
        "filter_negatives" => config.filter_negatives = parse(key, value)?,
        other => return Err(ConfigError(format!("unknown key `{other}`"))),
    }
    Ok(())
}

pub fn parse_config_text(text: &str) -> Result<ModelConfig, ConfigError> {
    let mut config = ModelConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("line {}: expected `key = value`", idx + 1)))?;
        apply_line(&mut config, key.trim(), value.trim())
            .map_err(|e| ConfigError(format!("line {}: {}", idx + 1, e.0)))?;
    }
    Ok(config)
}

pub fn load_config<P: AsRef<Path>>(path: P) -> Result<ModelConfig, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    parse_config_text(&text)
}

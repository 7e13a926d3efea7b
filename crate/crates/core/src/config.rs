//! Line-oriented `key = value` configuration with `[section]` headers.
//!
//! Blank lines and `#` comments are ignored; unknown sections or keys are
//! errors so typos surface immediately. [`RunConfig::to_text`] emits a
//! canonical echo (fixed order) that parses back to the same config; that
//! echo is embedded in every artifact for provenance.

use thiserror::Error;

use crate::attack::AttackConfig;
use crate::market::synth::GeneratorConfig;
use crate::nn::TrainConfig;
use crate::patterns::Thresholds;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    BadLine { line: usize, text: String },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { line: usize, section: String },
    #[error("line {line}: unknown key {key:?} in section [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: cannot parse {value:?} for key {key:?}")]
    BadValue { line: usize, key: String, value: String },
    #[error("{0}")]
    Invalid(String),
}

/// Everything a run needs, merged from defaults, an optional config file,
/// and command-line flags (flags win).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// Samples per pattern label; label 0 gets twice as many.
    pub per_label: usize,
    pub train_fraction: f64,
    /// Window offset when harvesting CSV bars (non-overlapping by default).
    pub stride: usize,
    pub workers: usize,
    pub generator: GeneratorConfig,
    pub thresholds: Thresholds,
    pub train: TrainConfig,
    pub attack: AttackConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            per_label: 1500,
            train_fraction: 0.8,
            stride: 10,
            workers: 1,
            generator: GeneratorConfig::default(),
            thresholds: Thresholds::default(),
            train: TrainConfig::default(),
            attack: AttackConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parse the file format on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = RunConfig::default();
        config.apply(text)?;
        Ok(config)
    }

    /// Apply `key = value` pairs from `text` onto this config.
    pub fn apply(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut section = "run".to_string();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                if !["run", "generator", "patterns", "optimizer", "attack"].contains(&section.as_str()) {
                    return Err(ConfigError::UnknownSection { line, section });
                }
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| ConfigError::BadLine { line, text: trimmed.to_string() })?;
            let key = key.trim();
            let value = value.trim();
            self.set(&section, key, value)
                .map_err(|e| match e {
                    SetError::UnknownKey => ConfigError::UnknownKey {
                        line,
                        section: section.clone(),
                        key: key.to_string(),
                    },
                    SetError::BadValue => ConfigError::BadValue {
                        line,
                        key: key.to_string(),
                        value: value.to_string(),
                    },
                })?;
        }
        Ok(())
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> Result<(), SetError> {
        fn parse<T: std::str::FromStr>(value: &str) -> Result<T, SetError> {
            value.parse().map_err(|_| SetError::BadValue)
        }
        match (section, key) {
            ("run", "seed") => self.seed = parse(value)?,
            ("run", "per_label") => self.per_label = parse(value)?,
            ("run", "train_fraction") => self.train_fraction = parse(value)?,
            ("run", "stride") => self.stride = parse(value)?,
            ("run", "workers") => self.workers = parse(value)?,
            ("generator", "base_price") => self.generator.base_price = parse(value)?,
            ("generator", "tick") => self.generator.tick = parse(value)?,
            ("generator", "trend_step") => self.generator.trend_step = parse(value)?,
            ("generator", "max_retries") => self.generator.max_retries = parse(value)?,
            ("patterns", "tall_body_frac") => self.thresholds.tall_body_frac = parse(value)?,
            ("patterns", "tall_body_mult") => self.thresholds.tall_body_mult = parse(value)?,
            ("patterns", "small_body_frac") => self.thresholds.small_body_frac = parse(value)?,
            ("patterns", "tiny_shadow_frac") => self.thresholds.tiny_shadow_frac = parse(value)?,
            ("patterns", "trend_slope_frac") => self.thresholds.trend_slope_frac = parse(value)?,
            ("optimizer", "epochs") => self.train.epochs = parse(value)?,
            ("optimizer", "batch_size") => self.train.batch_size = parse(value)?,
            ("optimizer", "learning_rate") => self.train.optimizer.learning_rate = parse(value)?,
            ("optimizer", "beta1") => self.train.optimizer.beta1 = parse(value)?,
            ("optimizer", "beta2") => self.train.optimizer.beta2 = parse(value)?,
            ("optimizer", "epsilon") => self.train.optimizer.epsilon = parse(value)?,
            ("attack", "scale_low") => self.attack.scale_low = parse(value)?,
            ("attack", "scale_high") => self.attack.scale_high = parse(value)?,
            ("attack", "bound") => self.attack.bound = parse(value)?,
            ("attack", "episodes") => self.attack.episodes = parse(value)?,
            ("attack", "reset_period") => self.attack.reset_period = parse(value)?,
            _ => return Err(SetError::UnknownKey),
        }
        Ok(())
    }

    /// Canonical echo: fixed section and key order, `key = value` lines.
    /// `parse(to_text(c)) == c` up to fields that only flags control.
    pub fn to_text(&self) -> String {
        format!(
            "[run]\n\
             seed = {}\n\
             per_label = {}\n\
             train_fraction = {}\n\
             stride = {}\n\
             workers = {}\n\
             \n\
             [generator]\n\
             base_price = {}\n\
             tick = {}\n\
             trend_step = {}\n\
             max_retries = {}\n\
             \n\
             [patterns]\n\
             tall_body_frac = {}\n\
             tall_body_mult = {}\n\
             small_body_frac = {}\n\
             tiny_shadow_frac = {}\n\
             trend_slope_frac = {}\n\
             \n\
             [optimizer]\n\
             epochs = {}\n\
             batch_size = {}\n\
             learning_rate = {}\n\
             beta1 = {}\n\
             beta2 = {}\n\
             epsilon = {}\n\
             \n\
             [attack]\n\
             scale_low = {}\n\
             scale_high = {}\n\
             bound = {}\n\
             episodes = {}\n\
             reset_period = {}\n",
            self.seed,
            self.per_label,
            self.train_fraction,
            self.stride,
            self.workers,
            self.generator.base_price,
            self.generator.tick,
            self.generator.trend_step,
            self.generator.max_retries,
            self.thresholds.tall_body_frac,
            self.thresholds.tall_body_mult,
            self.thresholds.small_body_frac,
            self.thresholds.tiny_shadow_frac,
            self.thresholds.trend_slope_frac,
            self.train.epochs,
            self.train.batch_size,
            self.train.optimizer.learning_rate,
            self.train.optimizer.beta1,
            self.train.optimizer.beta2,
            self.train.optimizer.epsilon,
            self.attack.scale_low,
            self.attack.scale_high,
            self.attack.bound,
            self.attack.episodes,
            self.attack.reset_period,
        )
    }

    /// Cross-field checks flags cannot express.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.per_label == 0 {
            return Err(ConfigError::Invalid("per_label must be at least 1".to_string()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "train_fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        if self.stride == 0 {
            return Err(ConfigError::Invalid("stride must be at least 1".to_string()));
        }
        if self.workers == 0 {
            return Err(ConfigError::Invalid("workers must be at least 1".to_string()));
        }
        self.attack.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug)]
enum SetError {
    UnknownKey,
    BadValue,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        let mut config = RunConfig::default();
        config.seed = 7;
        config.per_label = 25;
        config.thresholds.tall_body_frac = 0.55;
        config.attack.episodes = 80;
        config.train.optimizer.learning_rate = 5e-4;

        let text = config.to_text();
        let parsed = RunConfig::parse(&text).unwrap();
        assert_eq!(parsed, config);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# a comment\n\n[patterns]\n# another\ntiny_shadow_frac = 0.3\n";
        let config = RunConfig::parse(text).unwrap();
        assert_eq!(config.thresholds.tiny_shadow_frac, 0.3);
        assert_eq!(config.thresholds.tall_body_frac, 0.6); // untouched default
    }

    #[test]
    fn unknown_keys_and_sections_error_with_line_numbers() {
        match RunConfig::parse("[patterns]\nshadowy = 1\n") {
            Err(ConfigError::UnknownKey { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match RunConfig::parse("\n[spooky]\n") {
            Err(ConfigError::UnknownSection { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match RunConfig::parse("[attack]\nbound 0.5\n") {
            Err(ConfigError::BadLine { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match RunConfig::parse("[attack]\nbound = yes\n") {
            Err(ConfigError::BadValue { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn keys_before_any_section_belong_to_run() {
        let config = RunConfig::parse("seed = 99\n").unwrap();
        assert_eq!(config.seed, 99);
    }

    #[test]
    fn validate_rejects_degenerate_settings() {
        let mut config = RunConfig::default();
        config.per_label = 0;
        assert!(config.validate().is_err());

        let mut config = RunConfig::default();
        config.train_fraction = 1.0;
        assert!(config.validate().is_err());

        let mut config = RunConfig::default();
        config.attack.bound = 0.0;
        assert!(config.validate().is_err());
    }
}

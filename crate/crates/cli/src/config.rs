//! Run configuration: every tunable of the generator and the evaluation
//! chain, loadable from a line-oriented `key=value` file.
//!
//! The schema is closed: unknown keys are rejected, values are validated
//! on assignment, and `to_text` emits every key in a fixed order such
//! that parse, serialize, parse is an identity. The serialized form is
//! also what gets embedded in model files as the config echo.

use std::fmt::Write as _;
use std::path::Path;

use preictal_core::eval::HarnessConfig;
use preictal_core::signal::{SyntheticGenConfig, WindowSpec};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Unreadable { path: String, source: std::io::Error },
    #[error("line {line}: expected key=value, got {text:?}")]
    NotKeyValue { line: usize, text: String },
    #[error("unknown config key {key:?}")]
    UnknownKey { key: String },
    #[error("config key {key:?} rejects value {value:?}: {reason}")]
    BadValue { key: String, value: String, reason: String },
}

/// Full description of one run: how to synthesize the dataset and how
/// to fit and evaluate the pipeline on it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub gen: SyntheticGenConfig,
    pub harness: HarnessConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { gen: SyntheticGenConfig::default(), harness: HarnessConfig::defaults(42) }
    }
}

/// Schema order; `to_text` emits exactly these keys.
pub const CONFIG_KEYS: &[&str] = &[
    "n_interictal",
    "n_preictal",
    "channels",
    "duration_s",
    "sampling_rate_hz",
    "base_band_lo_hz",
    "base_band_hi_hz",
    "preictal_band_lo_hz",
    "preictal_band_hi_hz",
    "preictal_power_gain",
    "noise_std",
    "gen_seed",
    "downsample_factor",
    "window_len",
    "hop",
    "p_components",
    "k_sources",
    "m_outputs",
    "sweeps",
    "burn_in",
    "alpha",
    "noise_var",
    "hidden",
    "pretrain_steps",
    "finetune_steps",
    "pretrain_rate",
    "finetune_rate",
    "l2_coeff",
    "sparsity_coeff",
    "sparsity_target",
    "batch_size",
    "scaler_spread",
    "seed",
];

impl RunConfig {
    /// Parses a config file laid out one `key=value` per line; `#`
    /// starts a comment and blank lines are skipped. Later assignments
    /// to the same key win.
    pub fn from_text(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::NotKeyValue { line: idx + 1, text: raw.to_string() });
            };
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Unreadable {
            path: path.display().to_string(),
            source,
        })?;
        RunConfig::from_text(&text)
    }

    /// Serializes every key in schema order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            writeln!(out, "{key}={}", self.get(key)).expect("string write");
        }
        out
    }

    /// Current value of a schema key, in its parseable form.
    pub fn get(&self, key: &str) -> String {
        let g = &self.gen;
        let h = &self.harness;
        match key {
            "n_interictal" => g.n_interictal.to_string(),
            "n_preictal" => g.n_preictal.to_string(),
            "channels" => g.channels.to_string(),
            "duration_s" => g.duration_s.to_string(),
            "sampling_rate_hz" => g.sampling_rate_hz.to_string(),
            "base_band_lo_hz" => g.base_band_hz.0.to_string(),
            "base_band_hi_hz" => g.base_band_hz.1.to_string(),
            "preictal_band_lo_hz" => g.preictal_band_hz.0.to_string(),
            "preictal_band_hi_hz" => g.preictal_band_hz.1.to_string(),
            "preictal_power_gain" => g.preictal_power_gain.to_string(),
            "noise_std" => g.noise_std.to_string(),
            "gen_seed" => g.seed.to_string(),
            "downsample_factor" => h.downsample_factor.to_string(),
            "window_len" => h.window.window_len.to_string(),
            "hop" => h.window.hop.to_string(),
            "p_components" => h.p_components.to_string(),
            "k_sources" => h.k_sources.to_string(),
            "m_outputs" => h.m_outputs.to_string(),
            "sweeps" => h.sweeps.to_string(),
            "burn_in" => h.burn_in.to_string(),
            "alpha" => h.alpha.to_string(),
            "noise_var" => h.noise_var.to_string(),
            "hidden" => {
                let sizes: Vec<String> = h.hidden.iter().map(|n| n.to_string()).collect();
                sizes.join(",")
            }
            "pretrain_steps" => h.pretrain_steps.to_string(),
            "finetune_steps" => h.finetune_steps.to_string(),
            "pretrain_rate" => h.pretrain_rate.to_string(),
            "finetune_rate" => h.finetune_rate.to_string(),
            "l2_coeff" => h.l2_coeff.to_string(),
            "sparsity_coeff" => h.sparsity_coeff.to_string(),
            "sparsity_target" => h.sparsity_target.to_string(),
            "batch_size" => h.batch_size.to_string(),
            "scaler_spread" => h.scaler_spread.to_string(),
            "seed" => h.seed.to_string(),
            other => unreachable!("get called with non-schema key {other:?}"),
        }
    }

    /// Assigns one schema key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e: T::Err| ConfigError::BadValue {
                key: key.to_string(),
                value: value.to_string(),
                reason: e.to_string(),
            })
        }

        let g = &mut self.gen;
        let h = &mut self.harness;
        match key {
            "n_interictal" => g.n_interictal = parse(key, value)?,
            "n_preictal" => g.n_preictal = parse(key, value)?,
            "channels" => g.channels = parse(key, value)?,
            "duration_s" => g.duration_s = parse(key, value)?,
            "sampling_rate_hz" => g.sampling_rate_hz = parse(key, value)?,
            "base_band_lo_hz" => g.base_band_hz.0 = parse(key, value)?,
            "base_band_hi_hz" => g.base_band_hz.1 = parse(key, value)?,
            "preictal_band_lo_hz" => g.preictal_band_hz.0 = parse(key, value)?,
            "preictal_band_hi_hz" => g.preictal_band_hz.1 = parse(key, value)?,
            "preictal_power_gain" => g.preictal_power_gain = parse(key, value)?,
            "noise_std" => g.noise_std = parse(key, value)?,
            "gen_seed" => g.seed = parse(key, value)?,
            "downsample_factor" => h.downsample_factor = parse(key, value)?,
            "window_len" => h.window.window_len = parse(key, value)?,
            "hop" => h.window.hop = parse(key, value)?,
            "p_components" => h.p_components = parse(key, value)?,
            "k_sources" => h.k_sources = parse(key, value)?,
            "m_outputs" => h.m_outputs = parse(key, value)?,
            "sweeps" => h.sweeps = parse(key, value)?,
            "burn_in" => h.burn_in = parse(key, value)?,
            "alpha" => h.alpha = parse(key, value)?,
            "noise_var" => h.noise_var = parse(key, value)?,
            "hidden" => {
                let mut sizes = Vec::new();
                for part in value.split(',') {
                    sizes.push(parse::<usize>(key, part.trim())?);
                }
                if sizes.is_empty() || sizes.contains(&0) {
                    return Err(ConfigError::BadValue {
                        key: key.to_string(),
                        value: value.to_string(),
                        reason: "hidden sizes must be positive".to_string(),
                    });
                }
                h.hidden = sizes;
            }
            "pretrain_steps" => h.pretrain_steps = parse(key, value)?,
            "finetune_steps" => h.finetune_steps = parse(key, value)?,
            "pretrain_rate" => h.pretrain_rate = parse(key, value)?,
            "finetune_rate" => h.finetune_rate = parse(key, value)?,
            "l2_coeff" => h.l2_coeff = parse(key, value)?,
            "sparsity_coeff" => h.sparsity_coeff = parse(key, value)?,
            "sparsity_target" => h.sparsity_target = parse(key, value)?,
            "batch_size" => h.batch_size = parse(key, value)?,
            "scaler_spread" => h.scaler_spread = parse(key, value)?,
            "seed" => h.seed = parse(key, value)?,
            other => return Err(ConfigError::UnknownKey { key: other.to_string() }),
        }
        Ok(())
    }

    /// The preprocessing window, as the harness will use it.
    pub fn window(&self) -> WindowSpec {
        self.harness.window
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let cfg = RunConfig::default();
        let text = cfg.to_text();
        let back = RunConfig::from_text(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(text, back.to_text());
    }

    #[test]
    fn every_schema_key_appears_exactly_once_in_the_text() {
        let text = RunConfig::default().to_text();
        for key in CONFIG_KEYS {
            let hits = text.lines().filter(|l| l.starts_with(&format!("{key}="))).count();
            assert_eq!(hits, 1, "key {key}");
        }
        assert_eq!(text.lines().count(), CONFIG_KEYS.len());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_text("frobnicate=1\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { key } if key == "frobnicate"));
    }

    #[test]
    fn malformed_lines_and_values_are_rejected_with_positions() {
        let err = RunConfig::from_text("channels\n").unwrap_err();
        assert!(matches!(err, ConfigError::NotKeyValue { line: 1, .. }));

        let err = RunConfig::from_text("channels=three\n").unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { .. }));
    }

    #[test]
    fn comments_blanks_and_last_wins_assignment() {
        let cfg = RunConfig::from_text(
            "# synthetic run\n\nchannels=5  # five probes\nchannels=6\nhidden= 10, 4\n",
        )
        .unwrap();
        assert_eq!(cfg.gen.channels, 6);
        assert_eq!(cfg.harness.hidden, vec![10, 4]);
    }
}

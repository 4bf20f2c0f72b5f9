use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use bcast_core::config::ExperimentConfig;

pub fn parse(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn render(cfg: &ExperimentConfig) -> Result<String> {
    Ok(toml::to_string_pretty(cfg)?)
}

/// Reads the config at `path`. A missing file is created holding every
/// default, so the next edit starts from the complete setup.
pub fn load(path: Option<&Path>) -> Result<ExperimentConfig> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::default());
    };
    if !path.exists() {
        let cfg = ExperimentConfig::default();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, render(&cfg)?).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote default config to {}", path.display());
        return Ok(cfg);
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("invalid config {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = render(&cfg).unwrap();
        let back = parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(render(&back).unwrap(), text);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = parse("[experiment]\npairs = 3\n[protocol]\nvariant = \"bitcoin\"\n").unwrap();
        assert_eq!(cfg.experiment.pairs, 3);
        assert_eq!(cfg.topology.nodes_per_region, 50);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse("[experiment]\npears = 3\n").is_err());
    }
}

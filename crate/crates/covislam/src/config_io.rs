//! Config loading: TOML file, hardware preset selection, and generic
//! `--set section.key=value` overrides applied on the TOML tree so every
//! config key is reachable from the command line.

use crate::experiment::ExperimentConfig;
use anyhow::{anyhow, bail, Context, Result};
use arch_sim::HardwareConfig;
use std::path::Path;

pub fn default_config_value() -> toml::Value {
    toml::Value::try_from(ExperimentConfig::default()).expect("default config serializes")
}

pub fn load_config(
    path: Option<&Path>,
    preset: Option<&str>,
    sets: &[String],
) -> Result<ExperimentConfig> {
    let mut value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            let partial: toml::Value = toml::from_str(&text)?;
            // Overlay the file onto defaults so partial configs are fine.
            let mut base = default_config_value();
            merge(&mut base, &partial);
            base
        }
        None => default_config_value(),
    };
    if let Some(name) = preset {
        let hw = HardwareConfig::preset(name)
            .ok_or_else(|| anyhow!("unknown hardware preset '{name}' (edge|server)"))?;
        let table = value.as_table_mut().expect("config root is a table");
        table.insert("hardware".to_string(), toml::Value::try_from(hw)?);
    }
    for set in sets {
        apply_set(&mut value, set)?;
    }
    let cfg: ExperimentConfig = value.try_into().context("interpreting config")?;
    Ok(cfg)
}

fn merge(base: &mut toml::Value, overlay: &toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

fn parse_scalar(text: &str) -> toml::Value {
    if let Ok(b) = text.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    if let Ok(i) = text.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = text.parse::<f64>() {
        return toml::Value::Float(f);
    }
    toml::Value::String(text.to_string())
}

fn apply_set(value: &mut toml::Value, set: &str) -> Result<()> {
    let Some((path, raw)) = set.split_once('=') else {
        bail!("--set expects section.key=value, got '{set}'");
    };
    let mut cursor = value;
    let parts: Vec<&str> = path.trim().split('.').collect();
    if parts.is_empty() {
        bail!("empty --set path");
    }
    for part in &parts[..parts.len() - 1] {
        cursor = cursor
            .as_table_mut()
            .ok_or_else(|| anyhow!("'{part}' is not a table in --set path '{path}'"))?
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    let table = cursor
        .as_table_mut()
        .ok_or_else(|| anyhow!("--set path '{path}' does not address a table"))?;
    table.insert(
        parts.last().unwrap().to_string(),
        parse_scalar(raw.trim()),
    );
    Ok(())
}

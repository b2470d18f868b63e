//! Power profiles as flat `key = watts` files.
//!
//! ```text
//! # comment
//! doze = 0.4
//! lcm.idle = 2.8
//! hcm.tx = 7.36
//! wur = 0.0005
//! ```

use std::fmt::Write as _;
use std::path::Path;

use bnps_core::power::ProfileKey;
use bnps_core::PowerProfile;

use crate::error::{Error, LineError};

/// Parses and validates a profile. `wur` defaults to 0 when absent.
pub fn parse_profile(text: &str) -> Result<PowerProfile, Vec<LineError>> {
    let mut profile = PowerProfile::new(0.0);
    let mut errors = Vec::new();
    let mut seen = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = (i + 1) as u64;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            errors.push(LineError { line, message: format!("expected `key = value`, got `{content}`") });
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let watts: f64 = match value.parse() {
            Ok(v) => v,
            Err(_) => {
                errors.push(LineError { line, message: format!("`{value}` is not a number") });
                continue;
            }
        };
        if seen.iter().any(|k| k == key) {
            errors.push(LineError { line, message: format!("duplicate key `{key}`") });
            continue;
        }
        seen.push(key.to_string());
        if key == "wur" {
            profile.wur_watts = watts;
        } else if let Ok(k) = key.parse::<ProfileKey>() {
            profile.set(k, watts);
        } else {
            errors.push(LineError { line, message: format!("unknown key `{key}`") });
        }
    }
    if errors.is_empty() {
        if let Err(e) = profile.validate() {
            errors.push(LineError { line: 0, message: e.to_string() });
        }
    }
    if errors.is_empty() {
        Ok(profile)
    } else {
        Err(errors)
    }
}

/// One `key = value` line per entry, `wur` last. Values use the shortest exact decimal.
pub fn format_profile(profile: &PowerProfile) -> String {
    let mut out = String::new();
    for (key, watts) in profile.entries() {
        let _ = writeln!(out, "{key} = {watts}");
    }
    let _ = writeln!(out, "wur = {}", profile.wur_watts);
    out
}

pub fn read_profile(path: &Path) -> Result<PowerProfile, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_profile(&text).map_err(|errors| Error::Lines { path: path.to_path_buf(), errors })
}

pub fn write_profile(path: &Path, profile: &PowerProfile) -> Result<(), Error> {
    std::fs::write(path, format_profile(profile)).map_err(|e| Error::io(path, e))
}

//! TOML campaign files, built-in presets and validation with key paths and
//! line numbers.

use crate::error::{Error, Result};
use crate::link::{CalibrationConfig, CodecSpec, LinkCampaign, LinkChannelConfig};
use crate::system::{Policy, Scheme, SystemConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const PRESETS: [(&str, &str); 3] = [
    ("fig4a", include_str!("../presets/fig4a.toml")),
    ("fig4b", include_str!("../presets/fig4b.toml")),
    ("fig4c", include_str!("../presets/fig4c.toml")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    #[serde(default)]
    pub seed: u64,
    pub max_trials: u64,
    #[serde(default = "default_target_errors")]
    pub target_errors: u64,
    #[serde(default)]
    pub channel: LinkChannelConfig,
    pub curves: Vec<CurveSpec>,
}

fn default_target_errors() -> u64 {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub snr_db: Vec<f64>,
    pub codec: CodecSpec,
}

impl LinkSection {
    pub fn campaigns(&self) -> Vec<LinkCampaign> {
        self.curves
            .iter()
            .map(|c| LinkCampaign {
                codec: c.codec.clone(),
                snr_db: c.snr_db.clone(),
                max_trials: self.max_trials,
                target_errors: self.target_errors,
                seed: self.seed,
                channel: self.channel.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub slots: u64,
    pub seeds: Vec<u64>,
    /// BLER table CSV; the built-in table when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bler_table: Option<PathBuf>,
    #[serde(default)]
    pub base: SystemConfig,
    pub runs: Vec<RunSpec>,
}

/// One row of a system campaign: the base configuration with overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub scheme: Scheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Policy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub urllc_rate_per_ms: Option<f64>,
}

impl SystemSection {
    /// Fully resolved configuration of every run, in file order.
    pub fn resolved(&self) -> Vec<SystemConfig> {
        self.runs
            .iter()
            .map(|r| {
                let mut c = self.base.clone();
                c.scheduler.scheme = r.scheme;
                if let Some(p) = r.policy {
                    c.coexistence.policy = p;
                }
                if let Some(l) = r.urllc_rate_per_ms {
                    c.traffic.urllc_rate_per_ms = l;
                }
                c
            })
            .collect()
    }
}

impl CampaignConfig {
    /// Every violated constraint as `key.path: message`.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut d = Vec::new();
        if self.name.trim().is_empty() || self.name.contains(['/', '\\']) {
            d.push("name: must be a non-empty file-name-safe string".into());
        }
        if self.link.is_none() && self.system.is_none() && self.calibration.is_none() {
            d.push("name: campaign needs a [link], [system] or [calibration] section".into());
        }
        if let Some(l) = &self.link {
            if l.curves.is_empty() {
                d.push("link.curves: at least one curve is required".into());
            }
            for (i, c) in l.campaigns().iter().enumerate() {
                if let Err(e) = c.validate() {
                    d.push(format!("link.curves[{i}]: {}", strip(&e)));
                }
            }
        }
        if let Some(s) = &self.system {
            if s.slots == 0 {
                d.push("system.slots: must be positive".into());
            }
            if s.seeds.is_empty() {
                d.push("system.seeds: at least one seed is required".into());
            }
            let mut sorted = s.seeds.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != s.seeds.len() {
                d.push("system.seeds: seeds must be distinct".into());
            }
            if s.runs.is_empty() {
                d.push("system.runs: at least one run is required".into());
            }
            d.extend(s.base.diagnostics().into_iter().map(|m| format!("system.base.{m}")));
            let base_ok = s.base.diagnostics();
            for (i, c) in s.resolved().iter().enumerate() {
                for m in c.diagnostics() {
                    if !base_ok.contains(&m) {
                        d.push(format!("system.runs[{i}]: {m}"));
                    }
                }
            }
        }
        if let Some(c) = &self.calibration {
            if !(c.snr_step_db > 0.0) || c.max_points == 0 || c.target_errors == 0 || c.max_trials < c.target_errors {
                d.push("calibration: need snr_step_db > 0, max_points > 0 and max_trials >= target_errors > 0".into());
            }
        }
        d
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn strip(e: &Error) -> String {
    match e {
        Error::Config(m) | Error::Domain(m) | Error::Validation(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Parses and validates a campaign file. Errors name the offending key
/// path and, where it can be found, its line.
pub fn validate_config(text: &str) -> Result<CampaignConfig> {
    let cfg: CampaignConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    let d = cfg.diagnostics();
    if d.is_empty() {
        return Ok(cfg);
    }
    let lines: Vec<String> = d
        .iter()
        .map(|m| {
            let path = m.split(": ").next().unwrap_or("");
            match locate(text, path) {
                Some(n) => format!("line {n}: {m}"),
                None => m.clone(),
            }
        })
        .collect();
    Err(Error::Config(lines.join("\n")))
}

/// 1-based line where `path` (dotted, with `[i]` array indices) is defined.
pub fn locate(text: &str, path: &str) -> Option<usize> {
    let (parent, key) = match path.rfind('.') {
        Some(i) => (&path[..i], &path[i + 1..]),
        None => ("", path),
    };
    let key_base = key.split('[').next().unwrap_or(key);
    let mut table = String::new();
    let mut seen: std::collections::HashMap<String, usize> = Default::default();
    let mut fallback = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix("[[").and_then(|h| h.split("]]").next()) {
            let h = h.trim().to_string();
            let i = seen.entry(h.clone()).and_modify(|c| *c += 1).or_insert(0);
            table = format!("{h}[{i}]");
            if table == path {
                return Some(n + 1);
            }
            continue;
        }
        if let Some(h) = line.strip_prefix('[').and_then(|h| h.split(']').next()) {
            table = resolve(h.trim(), &seen);
            if table == path {
                return Some(n + 1);
            }
            continue;
        }
        let defines = line
            .strip_prefix(key_base)
            .is_some_and(|r| r.trim_start().starts_with('='));
        if defines {
            if table == parent {
                return Some(n + 1);
            }
            fallback.get_or_insert(n + 1);
        }
    }
    fallback
}

/// Maps a `[a.b.c]` header inside arrays of tables to its indexed path.
fn resolve(header: &str, seen: &std::collections::HashMap<String, usize>) -> String {
    let parts: Vec<&str> = header.split('.').collect();
    let mut out = String::new();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            out.push('.');
        }
        out.push_str(p);
        let prefix = parts[..=i].join(".");
        if let Some(c) = seen.get(&prefix) {
            out.push_str(&format!("[{c}]"));
        }
    }
    out
}

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Loads a preset by name or a campaign file by path.
pub fn load_config(name_or_path: &str) -> Result<CampaignConfig> {
    if let Some(text) = preset(name_or_path) {
        return validate_config(text);
    }
    let path = Path::new(name_or_path);
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config '{}': {e}", path.display())))?;
    validate_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_roundtrip() {
        for (name, text) in PRESETS {
            let c = validate_config(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(c.name, name);
            let again = validate_config(&c.to_toml().unwrap()).unwrap();
            assert_eq!(again, c);
        }
    }

    #[test]
    fn fig4b_has_four_rows() {
        let c = load_config("fig4b").unwrap();
        let s = c.system.unwrap();
        let schemes: Vec<Scheme> = s.runs.iter().map(|r| r.scheme).collect();
        assert_eq!(schemes, vec![Scheme::Baseline, Scheme::Instant, Scheme::SemiStatic, Scheme::Dynamic]);
        assert_eq!(s.resolved()[0].traffic.urllc_rate_per_ms, 0.0);
    }

    #[test]
    fn bad_reservation_reports_path_and_line() {
        let text = "name = \"x\"\n\n[system]\nslots = 10\nseeds = [1]\nruns = [{ scheme = \"semi_static\" }]\n\n[system.base.scheduler]\nreserved_symbols = 20\n";
        let e = validate_config(text).unwrap_err().to_string();
        assert!(e.contains("system.base.scheduler.reserved_symbols"), "{e}");
        assert!(e.contains("line 9"), "{e}");
        assert!(e.contains("14"), "{e}");
    }

    #[test]
    fn unknown_key_is_a_parse_error_with_location() {
        let text = "name = \"x\"\n[system]\nslots = 10\nseeds = [1]\nrunz = []\n";
        let e = validate_config(text).unwrap_err().to_string();
        assert!(e.contains("runz") && e.contains("line"), "{e}");
    }

    #[test]
    fn run_overrides_are_checked() {
        let text = "name = \"x\"\n[system]\nslots = 10\nseeds = [1]\n\n[[system.runs]]\nscheme = \"instant\"\n\n[[system.runs]]\nscheme = \"instant\"\nurllc_rate_per_ms = -1.0\n";
        let e = validate_config(text).unwrap_err().to_string();
        assert!(e.contains("system.runs[1]"), "{e}");
        assert!(e.contains("urllc_rate_per_ms"), "{e}");
    }

    #[test]
    fn locate_finds_nested_keys() {
        let text = "a = 1\n[[link.curves]]\nsnr_db = [1.0]\n[[link.curves]]\nsnr_db = [2.0]\n[link.channel]\nn_rbs = 0\n";
        assert_eq!(locate(text, "link.curves[1]"), Some(4));
        assert_eq!(locate(text, "link.channel.n_rbs"), Some(7));
        assert_eq!(locate(text, "a"), Some(1));
        assert_eq!(locate(text, "missing.key"), None);
    }
}

//! Experiment configuration: JSON file, command-line flags and the seed
//! environment fallback, resolved into validated core parameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use securecache_core::centralized::t_from_cache_size;
use securecache_core::{DemandVector, Scheme, SystemParams};

pub const SEED_ENV: &str = "SECURECACHE_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Decode,
    Secrecy,
    Memory,
    Rate,
}

impl Check {
    pub const ALL: [Check; 4] = [Check::Decode, Check::Secrecy, Check::Memory, Check::Rate];

    pub fn name(self) -> &'static str {
        match self {
            Check::Decode => "decode",
            Check::Secrecy => "secrecy",
            Check::Memory => "memory",
            Check::Rate => "rate",
        }
    }
}

impl FromStr for Check {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                format!("unknown check {s:?} (expected decode, secrecy, memory or rate)")
            })
    }
}

/// A configuration problem tied to one field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: &'static str,
    pub message: String,
}

impl FieldError {
    fn new(field: &'static str, message: impl Into<String>) -> Self {
        FieldError {
            field,
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for FieldError {}

/// Mirrors the JSON config file. Every field is optional so flags can
/// fill or override it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: Option<Scheme>,
    #[serde(rename = "N")]
    pub files: Option<usize>,
    #[serde(rename = "K")]
    pub users: Option<usize>,
    #[serde(rename = "F")]
    pub file_bits: Option<usize>,
    pub t: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub seed: Option<u64>,
    pub demand: Option<Vec<usize>>,
    pub checks: Option<Vec<Check>>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Fields set in `other` win.
    pub fn overlay(mut self, other: ExperimentConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(scheme, files, users, file_bits, t, m, seed, demand, checks);
        self
    }

    /// Validates and resolves into core types. `env_seed` is used only
    /// when no seed was configured.
    pub fn resolve(&self, env_seed: Option<&str>) -> Result<Experiment, FieldError> {
        let scheme = self
            .scheme
            .ok_or_else(|| FieldError::new("scheme", "missing"))?;
        let files = self.files.ok_or_else(|| FieldError::new("N", "missing"))?;
        let users = self.users.ok_or_else(|| FieldError::new("K", "missing"))?;
        let file_bits = self
            .file_bits
            .ok_or_else(|| FieldError::new("F", "missing"))?;
        if files == 0 {
            return Err(FieldError::new("N", "must be at least 1"));
        }
        if users == 0 {
            return Err(FieldError::new("K", "must be at least 1"));
        }
        if file_bits == 0 {
            return Err(FieldError::new("F", "must be at least 1"));
        }
        let seed = match (self.seed, env_seed) {
            (Some(s), _) => s,
            (None, Some(raw)) => raw.trim().parse().map_err(|_| {
                FieldError::new(
                    "seed",
                    format!("{SEED_ENV}={raw:?} is not an unsigned integer"),
                )
            })?,
            (None, None) => 0,
        };

        let params = match (self.t, self.m) {
            (Some(_), Some(_)) => return Err(FieldError::new("M", "give either t or M, not both")),
            (None, None) => return Err(FieldError::new("M", "missing (or give t)")),
            (Some(t), None) => match scheme {
                Scheme::Centralized => {
                    if t < 0.0 || t.fract() != 0.0 {
                        return Err(FieldError::new(
                            "t",
                            format!("{t} is not a whole number of users"),
                        ));
                    }
                    SystemParams::centralized(files, users, file_bits, t as usize, seed)
                        .map_err(|e| FieldError::new("t", e.to_string()))?
                }
                Scheme::Decentralized => {
                    SystemParams::decentralized(files, users, file_bits, t, seed)
                        .map_err(|e| FieldError::new("t", e.to_string()))?
                }
            },
            (None, Some(m)) => match scheme {
                Scheme::Centralized => {
                    let t = centralized_t_for(files, users, m)?;
                    SystemParams::centralized(files, users, file_bits, t, seed)
                        .map_err(|e| FieldError::new("M", e.to_string()))?
                }
                Scheme::Decentralized => {
                    SystemParams::decentralized_from_cache(files, users, file_bits, m, seed)
                        .map_err(|e| FieldError::new("M", e.to_string()))?
                }
            },
        };

        let demand = match &self.demand {
            Some(d) => DemandVector::new(d.clone(), files)
                .map_err(|e| FieldError::new("demand", e.to_string()))?,
            None => DemandVector::worst_case(files, users),
        };
        if demand.len() != users {
            return Err(FieldError::new(
                "demand",
                format!("has {} entries for K = {users} users", demand.len()),
            ));
        }
        let mut checks = self.checks.clone().unwrap_or_else(|| Check::ALL.to_vec());
        checks.sort();
        checks.dedup();
        Ok(Experiment {
            params,
            demand,
            checks,
        })
    }
}

/// Centralized placement exists only on the grid `M = (N-1)t/K + 1`.
fn centralized_t_for(files: usize, users: usize, m: f64) -> Result<usize, FieldError> {
    if m.is_nan() || m < 1.0 {
        return Err(FieldError::new(
            "M",
            "M < 1 infeasible under secure delivery",
        ));
    }
    if files == 1 {
        return Ok(0);
    }
    let t = t_from_cache_size(files, users, m).map_err(|e| FieldError::new("M", e.to_string()))?;
    let rounded = t.round();
    // Accept cache sizes typed with a few decimals, e.g. 1.6667 for 5/3.
    if (t - rounded).abs() > 1e-3 * users as f64 {
        return Err(FieldError::new(
            "M",
            format!("M = {m} is not a centralized grid point (t = {t:.4}); use M = (N-1)t/K + 1 or pass t"),
        ));
    }
    Ok(rounded as usize)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub params: SystemParams,
    pub demand: DemandVector,
    pub checks: Vec<Check>,
}

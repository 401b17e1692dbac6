//! Flat `key = value` model configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key must be
//! known and may appear once; keys that do not apply to the chosen
//! `model.kind` are rejected.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use super::catalog::FnSpec;
use super::diffusion::DiffusionModel;
use super::mc::{BoundaryRule, EulerSettings};
use super::pds::PdsModel;
use crate::error::{Error, Result};

const COMMON_KEYS: &[&str] = &[
    "model.kind",
    "model.dim",
    "grid.n",
    "grid.L",
    "mc.n_traj",
    "mc.seed",
];
const PDS_KEYS: &[&str] = &[
    "model.F",
    "model.G",
    "model.p",
    "model.a",
    "noise.sd",
    "domain.lo",
    "domain.hi",
];
const DIFFUSION_KEYS: &[&str] = &[
    "model.b",
    "model.r",
    "skeleton.t0",
    "skeleton.steps",
    "skeleton.horizon",
    "mc.dt",
    "mc.boundary",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    /// `key → (value, line number)`.
    entries: BTreeMap<String, (String, usize)>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected key = value, got '{line}'",
                    no + 1
                ))
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", no + 1)));
            }
            if let Some((_, first)) = entries.insert(k.to_string(), (v.to_string(), no + 1)) {
                return Err(Error::Config(format!(
                    "line {}: duplicate key '{k}' (first set on line {first})",
                    no + 1
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<T>().map(Some).map_err(|_| {
                Error::Config(format!("line {line}: cannot parse '{v}' for key '{key}'"))
            }),
        }
    }

    fn set<T: FromStr>(&self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.parsed(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn set_fn(&self, key: &str, slot: &mut FnSpec) -> Result<()> {
        if let Some((v, line)) = self.entries.get(key) {
            *slot = v
                .parse()
                .map_err(|e: Error| Error::Config(format!("line {line}: key '{key}': {e}")))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Pds(PdsModel),
    Diffusion(DiffusionModel),
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct McSettings {
    pub n_traj: usize,
    pub seed: u64,
    pub euler: EulerSettings,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            n_traj: 100_000,
            seed: 0,
            euler: EulerSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelConfig {
    pub model: Model,
    pub mc: McSettings,
}

impl ModelConfig {
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let kind = kv
            .get("model.kind")
            .ok_or_else(|| Error::Config("missing key 'model.kind'".into()))?;
        let specific = match kind {
            "pds" => PDS_KEYS,
            "diffusion" => DIFFUSION_KEYS,
            other => {
                return Err(Error::Config(format!(
                    "model.kind must be 'pds' or 'diffusion', got '{other}'"
                )))
            }
        };
        if let Some(k) = kv
            .keys()
            .find(|k| !COMMON_KEYS.contains(k) && !specific.contains(k))
        {
            return Err(Error::Config(format!(
                "unknown key '{k}' for model.kind = {kind}"
            )));
        }
        let mut mc = McSettings::default();
        kv.set("mc.n_traj", &mut mc.n_traj)?;
        kv.set("mc.seed", &mut mc.seed)?;
        let model = if kind == "pds" {
            let mut m = PdsModel::default();
            kv.set("model.dim", &mut m.dim)?;
            kv.set_fn("model.F", &mut m.f)?;
            kv.set_fn("model.G", &mut m.g)?;
            kv.set("model.p", &mut m.p)?;
            kv.set("model.a", &mut m.a)?;
            kv.set("noise.sd", &mut m.noise_sd)?;
            kv.set("domain.lo", &mut m.e_lo)?;
            kv.set("domain.hi", &mut m.e_hi)?;
            kv.set("grid.n", &mut m.grid_n)?;
            kv.set("grid.L", &mut m.grid_l)?;
            m.validate()?;
            Model::Pds(m)
        } else {
            let mut m = DiffusionModel::default();
            kv.set("model.dim", &mut m.dim)?;
            kv.set_fn("model.b", &mut m.b)?;
            kv.set_fn("model.r", &mut m.r)?;
            kv.set("grid.n", &mut m.grid_n)?;
            kv.set("grid.L", &mut m.grid_l)?;
            kv.set("skeleton.t0", &mut m.t0)?;
            kv.set("skeleton.steps", &mut m.steps)?;
            kv.set("skeleton.horizon", &mut m.horizon)?;
            kv.set("mc.dt", &mut mc.euler.dt)?;
            match kv.get("mc.boundary") {
                None | Some("bridge") => mc.euler.rule = BoundaryRule::Bridge,
                Some("endpoint") => mc.euler.rule = BoundaryRule::Endpoint,
                Some(other) => {
                    return Err(Error::Config(format!(
                        "mc.boundary must be 'bridge' or 'endpoint', got '{other}'"
                    )))
                }
            }
            if !(mc.euler.dt > 0.0 && mc.euler.dt.is_finite()) {
                return Err(Error::Config(format!(
                    "mc.dt must be positive, got {}",
                    mc.euler.dt
                )));
            }
            m.validate()?;
            Model::Diffusion(m)
        };
        if mc.n_traj < super::mc::MIN_TRAJECTORIES {
            return Err(Error::Config(format!(
                "mc.n_traj must be at least {}, got {}",
                super::mc::MIN_TRAJECTORIES,
                mc.n_traj
            )));
        }
        Ok(Self { model, mc })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(&KvConfig::parse(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv(&KvConfig::load(path)?)
    }
}

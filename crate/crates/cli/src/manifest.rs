//! Run manifests: everything needed to reproduce a synthesis or simulation.

use std::path::{Path, PathBuf};

use fasctl_core::plants::{self, PlantSpec};
use fasctl_core::sim::{ObserverInit, SimConfig};
use fasctl_core::{Complex64, FaultSignal};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Step size used when a manifest gives no simulation settings.
pub const DEFAULT_DT: f64 = 1e-4;
/// Recording stride paired with [`DEFAULT_DT`].
pub const DEFAULT_STRIDE: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(with = "plant_ref")]
    pub plant: PlantSpec,
    #[serde(default)]
    pub synthesis: Synthesis,
    /// Previously synthesized design; synthesized afresh when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<PathBuf>,
    /// Base simulation settings; registry defaults when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Seeds the sampled checks; simulations themselves are deterministic.
    #[serde(default)]
    pub seed: u64,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Synthesis {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poles: Option<Vec<Pole>>,
    /// Parametric matrix `Z` of the single control block, rows first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Output at which the observer LMI is frozen; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_op: Option<Vec<f64>>,
}

/// A closed-loop pole, either real or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Pole {
    Real(f64),
    Complex([f64; 2]),
}

impl Pole {
    pub fn value(self) -> Complex64 {
        match self {
            Pole::Real(re) => Complex64::new(re, 0.0),
            Pole::Complex([re, im]) => Complex64::new(re, im),
        }
    }

    /// Accepts `-2`, `-1+0.5i` or `-1-0.5j`.
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Ok(v) = s.parse::<f64>() {
            return Ok(Pole::Real(v));
        }
        let body = s.strip_suffix(['i', 'j']).ok_or_else(|| format!("invalid pole '{s}'"))?;
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'))
            .ok_or_else(|| format!("invalid pole '{s}'"))?;
        let re = body[..split].parse::<f64>().map_err(|_| format!("invalid pole '{s}'"))?;
        let im_text = &body[split..];
        let im = match im_text {
            "+" => 1.0,
            "-" => -1.0,
            t => t.parse::<f64>().map_err(|_| format!("invalid pole '{s}'"))?,
        };
        Ok(Pole::Complex([re, im]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// One generator per fault channel; the named preset when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<Vec<FaultSignal>>,
    #[serde(default = "yes")]
    pub compensation: bool,
    #[serde(default)]
    pub open_loop: bool,
}

fn yes() -> bool {
    true
}

impl Scenario {
    pub fn named(name: &str) -> Self {
        Self { name: name.to_string(), fault: None, compensation: true, open_loop: false }
    }
}

/// Built-in fault scenarios: `scenario1` is `6 sin t`, `scenario2` a chirped
/// sine of magnitude 6 plus a square wave of magnitude 2.
pub fn scenario_fault(name: &str, channels: usize) -> CliResult<Vec<FaultSignal>> {
    let one = match name {
        "scenario1" => FaultSignal::sinusoid(6.0, 1.0),
        "scenario2" => FaultSignal::scenario_two(1.0, 0.5, 4.0),
        "none" => FaultSignal::Zero,
        other => {
            return Err(CliError::Usage(format!(
                "unknown scenario '{other}' with no fault given (built-in: scenario1, scenario2, none)"
            )))
        }
    };
    Ok(vec![one; channels])
}

/// Plant given as a bare registry name or as a full table.
mod plant_ref {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Name(String),
        Spec(PlantSpec),
    }

    pub fn serialize<S: Serializer>(p: &PlantSpec, s: S) -> Result<S::Ok, S::Error> {
        if *p == PlantSpec::named(&p.name) {
            s.serialize_str(&p.name)
        } else {
            p.serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<PlantSpec, D::Error> {
        Ok(match Repr::deserialize(d)? {
            Repr::Name(n) => PlantSpec::named(&n),
            Repr::Spec(s) => s,
        })
    }
}

impl RunManifest {
    pub fn for_plant(name: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            plant: PlantSpec::named(name),
            synthesis: Synthesis::default(),
            design: None,
            sim: None,
            scenarios: Vec::new(),
            output_dir: None,
            seed: 0,
        }
    }

    /// Reads TOML or JSON, chosen by extension (`.json` is JSON, else TOML).
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let manifest: RunManifest = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))?
        } else {
            toml::from_str(&text).map_err(|e| CliError::parse(path, e))?
        };
        if manifest.schema_version != SCHEMA_VERSION {
            return Err(CliError::parse(
                path,
                format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", manifest.schema_version),
            ));
        }
        Ok(manifest)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Check(format!("cannot serialize manifest: {e}")))
    }

    pub fn preset(&self) -> CliResult<plants::Preset> {
        Ok(plants::preset(&self.plant.name)?)
    }

    pub fn mu_e(&self) -> CliResult<f64> {
        match self.synthesis.mu_e {
            Some(v) => Ok(v),
            None => Ok(self.preset()?.mu_e),
        }
    }

    pub fn gamma_f(&self) -> CliResult<f64> {
        match self.synthesis.gamma_f {
            Some(v) => Ok(v),
            None => Ok(self.preset()?.gamma_f),
        }
    }

    pub fn poles(&self) -> CliResult<Vec<Complex64>> {
        match &self.synthesis.poles {
            Some(p) => Ok(p.iter().map(|p| p.value()).collect()),
            None => Ok(self.preset()?.poles.iter().map(|&p| Complex64::new(p, 0.0)).collect()),
        }
    }

    /// Simulation settings for one scenario.
    pub fn sim_config(&self, scenario: &Scenario, channels: usize) -> CliResult<SimConfig> {
        let mut cfg = match &self.sim {
            Some(cfg) => cfg.clone(),
            None => {
                let pre = self.preset()?;
                SimConfig {
                    t_end: pre.t_end,
                    dt: DEFAULT_DT,
                    x0: pre.x0,
                    observer_init: ObserverInit::XtildeHat(pre.xtilde_hat0),
                    fault: Vec::new(),
                    stride: DEFAULT_STRIDE,
                    zeta: Vec::new(),
                }
            }
        };
        cfg.fault = match &scenario.fault {
            Some(f) => f.clone(),
            // a manifest's own fault list runs under the name "default"
            None if scenario.name == "default" && !cfg.fault.is_empty() => cfg.fault,
            None => scenario_fault(&scenario.name, channels)?,
        };
        Ok(cfg)
    }

    /// Scenarios to run, falling back to a single default one.
    pub fn scenario_list(&self) -> Vec<Scenario> {
        if !self.scenarios.is_empty() {
            return self.scenarios.clone();
        }
        let name = if self.sim.as_ref().is_some_and(|s| !s.fault.is_empty()) { "default" } else { "scenario1" };
        vec![Scenario::named(name)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pole_strings() {
        assert_eq!(Pole::parse("-2").unwrap(), Pole::Real(-2.0));
        assert_eq!(Pole::parse("-1+0.5i").unwrap(), Pole::Complex([-1.0, 0.5]));
        assert_eq!(Pole::parse("-1e-1-2j").unwrap(), Pole::Complex([-0.1, -2.0]));
        assert_eq!(Pole::parse("-3-i").unwrap(), Pole::Complex([-3.0, -1.0]));
        assert!(Pole::parse("abc").is_err());
        assert!(Pole::parse("-2x").is_err());
    }

    #[test]
    fn bare_plant_name_round_trips() {
        let m = RunManifest::for_plant("ballbeam");
        let text = m.to_toml().unwrap();
        assert!(text.contains("plant = \"ballbeam\""), "{text}");
        let back: RunManifest = toml::from_str(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn plant_table_with_parameters() {
        let mut m = RunManifest::for_plant("electromech");
        let mut params = plants::ElectromechParams::default();
        params.m_o *= 2.0;
        m.plant.electromech = Some(params);
        let text = m.to_toml().unwrap();
        let back: RunManifest = toml::from_str(&text).unwrap();
        assert_eq!(back.plant.electromech.unwrap().m_o, params.m_o);

        let bad: Result<RunManifest, _> = toml::from_str("plant = { name = \"electromech\", bogus = 1 }");
        assert!(bad.is_err());
    }

    #[test]
    fn default_scenario_uses_preset_fault() {
        let m = RunManifest::for_plant("electromech");
        let list = m.scenario_list();
        assert_eq!(list[0].name, "scenario1");
        let cfg = m.sim_config(&list[0], 1).unwrap();
        assert_eq!(cfg.fault, vec![FaultSignal::sinusoid(6.0, 1.0)]);
        assert_eq!(cfg.dt, DEFAULT_DT);
    }

    #[test]
    fn unknown_scenario_without_fault_is_usage_error() {
        let m = RunManifest::for_plant("electromech");
        let err = m.sim_config(&Scenario::named("mystery"), 1).unwrap_err();
        assert_eq!(err.kind(), "usage");
    }
}

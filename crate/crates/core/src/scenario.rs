//! Declarative experiment description.
//!
//! A scenario is one TOML file. Relative paths inside it resolve against the file's
//! directory. Every problem found while checking a scenario is reported together.
//!
//! ```toml
//! seed = 7
//! horizon_s = 60
//!
//! [periods]
//! p1_s = 3
//! p2_s = 6
//! p3_s = 8
//!
//! [[factory]]
//! id = "AOU1"
//! provider = "AOE_wind"
//! instance = "instances/f1.txt"
//!
//! [[provider]]
//! id = "AOE_wind"
//! capacity_wh = 120.0
//! [provider.wind]
//! rotor_area_m2 = 10.0
//! wind_speed_ms = 8.0
//! trace = "traces/step.csv"
//! ```

use crate::agents::EnergySource;
use crate::energy::{
    HumidityConvention, PvSourceConfig, SensorSample, SensorTrace, WindSourceConfig,
    STANDARD_PRESSURE_PA,
};
use crate::jobshop::{generate_instance, load_instance, Instance, Seconds};
use crate::pso::PsoParams;
use crate::resched::RescheduleConfig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("scenario syntax: {0}")]
    Syntax(String),
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Periods {
    pub p1_s: Seconds,
    pub p2_s: Seconds,
    pub p3_s: Seconds,
}

impl Default for Periods {
    fn default() -> Self {
        Periods {
            p1_s: 3,
            p2_s: 6,
            p3_s: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSpec {
    pub cap_factor: u64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec { cap_factor: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSpec {
    /// Delivery delay for every message in simulated runs.
    pub latency_s: Seconds,
    /// Wall-clock length of one simulated second in distributed runs.
    pub time_scale_ms: u64,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            latency_s: 0,
            time_scale_ms: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    pub machines: usize,
    pub speeds: usize,
    pub jobs: usize,
    pub seed: u64,
    #[serde(default = "unit_scale")]
    pub energy_scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorySpec {
    pub id: String,
    /// Provider that validates this factory's predictive schedule.
    pub provider: String,
    #[serde(default)]
    pub instance: Option<PathBuf>,
    #[serde(default)]
    pub generate: Option<GenerateSpec>,
    /// Providers whose control messages reach this factory; all of them when absent.
    #[serde(default)]
    pub subscribe: Option<Vec<String>>,
    #[serde(default)]
    pub listen: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSpec {
    pub temperature_c: f64,
    pub humidity_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindSpec {
    pub rotor_area_m2: f64,
    pub wind_speed_ms: f64,
    #[serde(default = "standard_pressure")]
    pub pressure_pa: f64,
    /// Reference conditions; the first trace reading when absent.
    #[serde(default)]
    pub baseline: Option<BaselineSpec>,
    #[serde(default)]
    pub humidity: HumidityConvention,
    #[serde(default)]
    pub deadband: f64,
    pub trace: PathBuf,
}

fn standard_pressure() -> f64 {
    STANDARD_PRESSURE_PA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSpec {
    pub id: String,
    pub capacity_wh: f64,
    #[serde(default)]
    pub wind: Option<WindSpec>,
    #[serde(default)]
    pub pv: Option<PvSourceConfig>,
    #[serde(default)]
    pub listen: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AceSpec {
    #[serde(default = "ace_id")]
    pub id: String,
    #[serde(default)]
    pub listen: Option<String>,
}

fn ace_id() -> String {
    "ACE".into()
}

impl Default for AceSpec {
    fn default() -> Self {
        AceSpec {
            id: ace_id(),
            listen: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default)]
    pub horizon_s: Seconds,
    #[serde(default = "unit_scale")]
    pub gamma0: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub periods: Periods,
    /// `seed` here is ignored; each factory derives its own from the top-level seed.
    #[serde(default)]
    pub pso: PsoParams,
    #[serde(default)]
    pub reschedule: RescheduleConfig,
    #[serde(default)]
    pub filter: FilterSpec,
    #[serde(default)]
    pub network: NetworkSpec,
    #[serde(default)]
    pub ace: AceSpec,
    #[serde(default, rename = "factory")]
    pub factories: Vec<FactorySpec>,
    #[serde(default, rename = "provider")]
    pub providers: Vec<ProviderSpec>,
}

fn one() -> usize {
    1
}

fn default_alpha() -> f64 {
    0.1
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Syntax(e.to_string()))
    }

    /// Checks everything that does not need the file system.
    pub fn check(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if self.repetitions == 0 {
            errors.push("repetitions must be at least 1".to_string());
        }
        if !(0.0..=1.0).contains(&self.gamma0) {
            errors.push(format!("gamma0 must lie in [0, 1], got {}", self.gamma0));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            errors.push(format!("alpha must be positive, got {}", self.alpha));
        }
        let p = self.periods;
        if p.p1_s == 0 || p.p2_s == 0 || p.p3_s == 0 {
            errors.push("periods must be positive".to_string());
        } else if p.p1_s >= p.p2_s {
            errors.push(format!(
                "p1_s ({}) must be smaller than p2_s ({})",
                p.p1_s, p.p2_s
            ));
        }
        if self.filter.cap_factor == 0 {
            errors.push("filter.cap_factor must be at least 1".to_string());
        }
        if let Err(e) = self.pso.validate() {
            errors.push(format!("pso: {e}"));
        }
        if self.factories.is_empty() {
            errors.push("at least one [[factory]] is required".to_string());
        }
        if self.providers.is_empty() {
            errors.push("at least one [[provider]] is required".to_string());
        }

        let mut ids = BTreeSet::new();
        let all_ids = self
            .factories
            .iter()
            .map(|f| &f.id)
            .chain(self.providers.iter().map(|p| &p.id))
            .chain(std::iter::once(&self.ace.id));
        for id in all_ids {
            if id.is_empty() {
                errors.push("agent ids must not be empty".to_string());
            } else if !ids.insert(id.as_str()) {
                errors.push(format!("duplicate agent id {id:?}"));
            }
        }

        let providers: BTreeSet<&str> = self.providers.iter().map(|p| p.id.as_str()).collect();
        for f in &self.factories {
            if !providers.contains(f.provider.as_str()) {
                errors.push(format!(
                    "factory {}: unknown provider {:?}",
                    f.id, f.provider
                ));
            }
            for s in f.subscribe.iter().flatten() {
                if !providers.contains(s.as_str()) {
                    errors.push(format!(
                        "factory {}: cannot subscribe to unknown provider {s:?}",
                        f.id
                    ));
                }
            }
            match (&f.instance, &f.generate) {
                (Some(_), Some(_)) => errors.push(format!(
                    "factory {}: give either instance or generate, not both",
                    f.id
                )),
                (None, None) => errors.push(format!(
                    "factory {}: needs an instance path or a generate table",
                    f.id
                )),
                (None, Some(g)) => {
                    if g.machines == 0 || g.speeds == 0 || g.jobs == 0 {
                        errors.push(format!(
                            "factory {}: generated dimensions must be at least 1",
                            f.id
                        ));
                    }
                    if !(g.energy_scale.is_finite() && g.energy_scale > 0.0) {
                        errors.push(format!("factory {}: energy_scale must be positive", f.id));
                    }
                }
                (Some(_), None) => {}
            }
        }

        for p in &self.providers {
            if !(p.capacity_wh.is_finite() && p.capacity_wh >= 0.0) {
                errors.push(format!(
                    "provider {}: capacity_wh must be non-negative",
                    p.id
                ));
            }
            match (&p.wind, &p.pv) {
                (Some(_), Some(_)) => errors.push(format!(
                    "provider {}: give either wind or pv, not both",
                    p.id
                )),
                (None, None) => errors.push(format!("provider {}: needs a wind or pv table", p.id)),
                (Some(w), None) => {
                    let probe = WindSourceConfig {
                        rotor_area_m2: w.rotor_area_m2,
                        wind_speed_ms: w.wind_speed_ms,
                        pressure_pa: w.pressure_pa,
                        baseline: SensorSample {
                            t_s: 0,
                            temperature_c: w.baseline.map_or(15.0, |b| b.temperature_c),
                            humidity_pct: w.baseline.map_or(0.0, |b| b.humidity_pct),
                        },
                        humidity: w.humidity,
                        deadband: w.deadband,
                    };
                    if let Err(e) = probe.validate() {
                        errors.push(format!("provider {}: {e}", p.id));
                    }
                }
                (None, Some(pv)) => {
                    if !(pv.taux_pct > 0.0 && pv.taux_pct <= 100.0) {
                        errors.push(format!(
                            "provider {}: pv taux_pct must lie in (0, 100]",
                            p.id
                        ));
                    }
                }
            }
        }
        errors
    }

    /// Validates, then reads instances and traces relative to `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<LoadedScenario, ScenarioError> {
        let mut errors = self.check();
        let mut factories = Vec::new();
        for f in &self.factories {
            let instance = match (&f.instance, &f.generate) {
                (Some(path), None) => {
                    let full = base_dir.join(path);
                    match std::fs::read_to_string(&full) {
                        Ok(text) => match load_instance(&text) {
                            Ok(inst) => Some(inst),
                            Err(e) => {
                                errors.push(format!("factory {}: {}: {e}", f.id, full.display()));
                                None
                            }
                        },
                        Err(e) => {
                            errors.push(format!(
                                "factory {}: instance {} not found ({e})",
                                f.id,
                                full.display()
                            ));
                            None
                        }
                    }
                }
                (None, Some(g))
                    if g.machines > 0 && g.speeds > 0 && g.jobs > 0 && g.energy_scale > 0.0 =>
                {
                    let inst = generate_instance(g.machines, g.jobs, g.speeds, g.seed);
                    Some(if g.energy_scale == 1.0 {
                        inst
                    } else {
                        inst.scale_energy(g.energy_scale)
                    })
                }
                _ => None,
            };
            if let Some(instance) = instance {
                factories.push(LoadedFactory {
                    spec: f.clone(),
                    instance,
                });
            }
        }

        let mut providers = Vec::new();
        for p in &self.providers {
            match (&p.wind, &p.pv) {
                (Some(w), None) => {
                    let full = base_dir.join(&w.trace);
                    let trace = match std::fs::read_to_string(&full) {
                        Ok(text) => SensorTrace::from_csv(&text)
                            .map_err(|e| format!("provider {}: {}: {e}", p.id, full.display())),
                        Err(e) => Err(format!(
                            "provider {}: trace {} not found ({e})",
                            p.id,
                            full.display()
                        )),
                    };
                    match trace {
                        Ok(trace) => {
                            let first = trace.samples()[0];
                            let baseline = SensorSample {
                                t_s: 0,
                                temperature_c: w
                                    .baseline
                                    .map_or(first.temperature_c, |b| b.temperature_c),
                                humidity_pct: w
                                    .baseline
                                    .map_or(first.humidity_pct, |b| b.humidity_pct),
                            };
                            let config = WindSourceConfig {
                                rotor_area_m2: w.rotor_area_m2,
                                wind_speed_ms: w.wind_speed_ms,
                                pressure_pa: w.pressure_pa,
                                baseline,
                                humidity: w.humidity,
                                deadband: w.deadband,
                            };
                            if let Err(e) = config.validate() {
                                errors.push(format!("provider {}: {e}", p.id));
                            }
                            providers.push(LoadedProvider {
                                spec: p.clone(),
                                source: EnergySource::Wind(config),
                                trace: Some(trace),
                            });
                        }
                        Err(e) => errors.push(e),
                    }
                }
                (None, Some(pv)) => providers.push(LoadedProvider {
                    spec: p.clone(),
                    source: EnergySource::Pv(*pv),
                    trace: None,
                }),
                _ => {}
            }
        }

        if errors.is_empty() {
            Ok(LoadedScenario {
                scenario: self.clone(),
                factories,
                providers,
            })
        } else {
            Err(ScenarioError::Invalid(errors))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedFactory {
    pub spec: FactorySpec,
    pub instance: Instance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedProvider {
    pub spec: ProviderSpec,
    pub source: EnergySource,
    pub trace: Option<SensorTrace>,
}

/// A checked scenario with every referenced file read.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub factories: Vec<LoadedFactory>,
    pub providers: Vec<LoadedProvider>,
}

impl LoadedScenario {
    /// Providers whose control messages reach `factory`.
    pub fn subscriptions(&self, factory: &FactorySpec) -> Vec<String> {
        match &factory.subscribe {
            Some(list) => list.clone(),
            None => self.providers.iter().map(|p| p.spec.id.clone()).collect(),
        }
    }
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Read {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let scenario = Scenario::from_toml(&text)?;
    scenario.resolve(path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PV_ONLY: &str = r#"
seed = 3
horizon_s = 30

[[factory]]
id = "AOU1"
provider = "PV"
generate = { machines = 2, speeds = 2, jobs = 2, seed = 1 }

[[provider]]
id = "PV"
capacity_wh = 1000.0
pv = { taux_pct = 10.0 }
"#;

    #[test]
    fn defaults_filled() {
        let s = Scenario::from_toml(PV_ONLY).unwrap();
        assert_eq!(s.periods, Periods::default());
        assert_eq!(s.repetitions, 1);
        assert_eq!(s.alpha, 0.1);
        assert_eq!(s.ace.id, "ACE");
        let loaded = s.resolve(Path::new(".")).unwrap();
        assert_eq!(loaded.factories[0].instance.size_label(), "2x2x2");
        assert_eq!(
            loaded.subscriptions(&loaded.factories[0].spec),
            vec!["PV".to_string()]
        );
    }

    #[test]
    fn all_errors_reported() {
        let text = PV_ONLY
            .replace(
                "horizon_s = 30",
                "horizon_s = 30\nrepetitions = 0\ngamma0 = 2.0",
            )
            .replace("provider = \"PV\"", "provider = \"WIND\"");
        let s = Scenario::from_toml(&text).unwrap();
        match s.resolve(Path::new(".")) {
            Err(ScenarioError::Invalid(errors)) => {
                assert_eq!(errors.len(), 3, "{errors:?}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_files_named() {
        let text = PV_ONLY.replace(
            "generate = { machines = 2, speeds = 2, jobs = 2, seed = 1 }",
            "instance = \"nowhere.txt\"",
        );
        let err = Scenario::from_toml(&text)
            .unwrap()
            .resolve(Path::new("/tmp"))
            .unwrap_err();
        assert!(err.to_string().contains("nowhere.txt"));
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(matches!(
            Scenario::from_toml("sede = 1"),
            Err(ScenarioError::Syntax(_))
        ));
    }
}

//! JSON run configuration. Every field is optional; omitted fields take the
//! orbit benchmark settings.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::continuation::{ContinuationSchedule, SolverSettings};
use crate::dynamics::JumpCoefficient;
use crate::integrator::IntegratorConfig;
use crate::orbit::OrbitConfig;
use crate::shooting::ShootingConfig;
use crate::smoothing::SharpnessParams;

/// Sharpness levels of the benchmark, in solve order.
pub const DEFAULT_SCHEDULE: [f64; 6] = [0.5, 0.1, 5e-2, 1e-2, 5e-3, 1e-3];

/// A configuration that failed to load or validate; the message names the field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<String> for ConfigError {
    fn from(message: String) -> Self {
        Self(message)
    }
}

/// Registered problems, selected by `"name"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name")]
pub enum ProblemConfig {
    #[serde(rename = "orbit2d")]
    Orbit2d(OrbitConfig),
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self::Orbit2d(OrbitConfig::default())
    }
}

impl ProblemConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Orbit2d(_) => "orbit2d",
        }
    }
}

/// A schedule entry: one `rho` for all three parameters, or each given separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleLevel {
    Uniform(f64),
    Split(SharpnessParams),
}

impl ScheduleLevel {
    fn params(self) -> crate::Result<SharpnessParams> {
        match self {
            Self::Uniform(rho) => SharpnessParams::uniform(rho),
            Self::Split(p) => SharpnessParams::new(p.rho1, p.rho2, p.rho3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub csv: bool,
    pub svg: bool,
    /// Uniform sampling intervals per trajectory (`intervals + 1` rows).
    pub intervals: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("output"),
            csv: true,
            svg: true,
            intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub schedule: Vec<ScheduleLevel>,
    pub integrator: IntegratorConfig,
    pub shooting: ShootingConfig,
    /// Midpoint refinements allowed per level, see [`SolverSettings`].
    pub max_refinements: usize,
    pub output: OutputConfig,
    pub jump_coefficient: JumpCoefficient,
    /// Also write the unconstrained extremal used as the initial guess.
    pub include_unconstrained: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemConfig::default(),
            schedule: DEFAULT_SCHEDULE
                .iter()
                .map(|&r| ScheduleLevel::Uniform(r))
                .collect(),
            integrator: IntegratorConfig::default(),
            shooting: ShootingConfig::default(),
            max_refinements: SolverSettings::default().max_refinements,
            output: OutputConfig::default(),
            jump_coefficient: JumpCoefficient::default(),
            include_unconstrained: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match &self.problem {
            ProblemConfig::Orbit2d(orbit) => orbit.validate().map_err(field("problem"))?,
        }
        if self.schedule.is_empty() {
            return Err(ConfigError(
                "schedule: must contain at least one level".into(),
            ));
        }
        self.schedule().map_err(field("schedule"))?;
        self.integrator.validate().map_err(field("integrator"))?;
        self.shooting.validate().map_err(field("shooting"))?;
        if self.output.intervals == 0 {
            return Err(ConfigError("output.intervals: must be positive".into()));
        }
        Ok(())
    }

    pub fn schedule(&self) -> crate::Result<ContinuationSchedule> {
        let levels = self
            .schedule
            .iter()
            .map(|l| l.params())
            .collect::<crate::Result<Vec<_>>>()?;
        if levels.iter().all(|p| p.rho1 == p.rho2 && p.rho2 == p.rho3) {
            ContinuationSchedule::uniform(&levels.iter().map(|p| p.rho1).collect::<Vec<_>>())
        } else {
            ContinuationSchedule::from_params(levels)
        }
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            integrator: self.integrator,
            shooting: self.shooting,
            jump: self.jump_coefficient,
            sample_intervals: self.output.intervals,
            max_refinements: self.max_refinements,
        }
    }
}

fn field(name: &'static str) -> impl Fn(crate::OcpError) -> ConfigError {
    move |e| ConfigError(format!("{name}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_benchmark_defaults() {
        let config = RunConfig::from_json("{}").unwrap();
        assert_eq!(config, RunConfig::default());
        assert_eq!(config.schedule().unwrap().len(), 6);
        assert_eq!(config.problem.name(), "orbit2d");
        assert_eq!(config.solver_settings().sample_intervals, 2000);
    }

    #[test]
    fn default_round_trips_through_json() {
        let text = serde_json::to_string_pretty(&RunConfig::default()).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), RunConfig::default());
    }

    #[test]
    fn errors_name_the_offending_field() {
        let err = RunConfig::from_json(r#"{"schedule": []}"#).unwrap_err();
        assert!(err.0.starts_with("schedule:"), "{err}");
        let err = RunConfig::from_json(r#"{"schedule": [0.1, 0.5]}"#).unwrap_err();
        assert!(err.0.starts_with("schedule:"), "{err}");
        let err = RunConfig::from_json(r#"{"shedule": [0.1]}"#).unwrap_err();
        assert!(err.0.contains("shedule"), "{err}");
        let err =
            RunConfig::from_json(r#"{"problem": {"name": "orbit2d", "pmin": 1.0}}"#).unwrap_err();
        assert!(err.0.contains("pmin"), "{err}");
        let err = RunConfig::from_json(r#"{"problem": {"name": "pendulum"}}"#).unwrap_err();
        assert!(err.0.contains("pendulum"), "{err}");
        let err = RunConfig::from_json(r#"{"shooting": {"fun_tol": -1.0}}"#).unwrap_err();
        assert!(err.0.starts_with("shooting:"), "{err}");
        let err = RunConfig::from_json(r#"{"output": {"intervals": 0}}"#).unwrap_err();
        assert!(err.0.starts_with("output.intervals"), "{err}");
    }

    #[test]
    fn problem_parameters_and_split_levels() {
        let text = r#"{
            "problem": {"name": "orbit2d", "p_min": 0.95},
            "schedule": [0.5, {"rho1": 0.1, "rho2": 0.2, "rho3": 0.05}],
            "jump_coefficient": "mu_tilde"
        }"#;
        let config = RunConfig::from_json(text).unwrap();
        let ProblemConfig::Orbit2d(orbit) = &config.problem;
        assert_eq!(orbit.p_min, 0.95);
        assert_eq!(orbit.mu_g, 1.0);
        let schedule = config.schedule().unwrap();
        assert_eq!(
            schedule.levels()[1],
            SharpnessParams::new(0.1, 0.2, 0.05).unwrap()
        );
        assert_eq!(config.jump_coefficient, JumpCoefficient::SmoothedMultiplier);
    }
}

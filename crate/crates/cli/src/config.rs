use std::collections::BTreeSet;
use std::path::PathBuf;

use ehrenfest_core::{GridSpec, PhaseSpacePoint, SystemSpec, TimeSchedule};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Dilation,
    DoubleWell,
    Harmonic,
    Free,
}

impl Scenario {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| CliError::Config(format!("scenario: unknown value `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Diagnostic {
    Moments,
    Husimi,
    CoherentFit,
    Egorov,
    Revivals,
    TubeMass,
    MeasurementSamples,
}

impl Diagnostic {
    pub fn name(self) -> &'static str {
        match self {
            Self::Moments => "moments",
            Self::Husimi => "husimi",
            Self::CoherentFit => "coherent-fit",
            Self::Egorov => "egorov",
            Self::Revivals => "revivals",
            Self::TubeMass => "tube-mass",
            Self::MeasurementSamples => "measurement-samples",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HbarSpec {
    Single(f64),
    List(Vec<f64>),
}

impl HbarSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::Single(h) => vec![*h],
            Self::List(v) => v.clone(),
        }
    }
}

/// A final time, either explicit or as a multiple of `λ⁻¹ log(1/ℏ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeSpec {
    Value(f64),
    Keyword(String),
}

impl TimeSpec {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s.parse::<f64>() {
            Ok(v) => Ok(Self::Value(v)),
            Err(_) => {
                let spec = Self::Keyword(s.to_string());
                spec.schedule()?;
                Ok(spec)
            }
        }
    }

    pub fn schedule(&self) -> Result<TimeSchedule, CliError> {
        match self {
            Self::Value(v) => Ok(TimeSchedule::Fixed(*v)),
            Self::Keyword(k) => match k.as_str() {
                "half-ehrenfest" => Ok(TimeSchedule::Ehrenfest(0.5)),
                "ehrenfest" => Ok(TimeSchedule::Ehrenfest(1.0)),
                "two-ehrenfest" => Ok(TimeSchedule::Ehrenfest(2.0)),
                other => Err(CliError::Config(format!(
                    "t_final: expected a number or one of half-ehrenfest, ehrenfest, two-ehrenfest, got `{other}`"
                ))),
            },
        }
    }
}

fn default_stride() -> usize {
    100
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_sample_count() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub hbar: HbarSpec,
    /// Overrides the preset grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<TimeSpec>,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub diagnostics: BTreeSet<Diagnostic>,
    /// Centre of the initial coherent state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<PhaseSpacePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default = "default_sample_count")]
    pub sample_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revival_window: Option<(f64, f64)>,
    #[serde(default)]
    pub write_snapshots: bool,
}

impl ExperimentConfig {
    pub fn preset(scenario: Scenario) -> Self {
        Self {
            scenario,
            hbar: HbarSpec::Single(1e-3),
            grid: None,
            dt: None,
            t_final: None,
            snapshot_stride: default_stride(),
            seed: 0,
            output_dir: default_output_dir(),
            diagnostics: BTreeSet::new(),
            start: None,
            omega: None,
            sample_count: default_sample_count(),
            revival_window: None,
            write_snapshots: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn system(&self) -> SystemSpec {
        match self.scenario {
            Scenario::Dilation => SystemSpec::Dilation,
            Scenario::DoubleWell => SystemSpec::double_well(),
            Scenario::Harmonic => SystemSpec::Harmonic { omega: self.omega.unwrap_or(1.0) },
            Scenario::Free => SystemSpec::Free,
        }
    }

    pub fn start_point(&self) -> PhaseSpacePoint {
        self.start.unwrap_or(match self.scenario {
            Scenario::Dilation | Scenario::DoubleWell => PhaseSpacePoint::ORIGIN,
            Scenario::Harmonic => PhaseSpacePoint::new(1.0, 0.0),
            Scenario::Free => PhaseSpacePoint::new(0.0, 1.0),
        })
    }

    pub fn time_spec(&self) -> TimeSpec {
        self.t_final.clone().unwrap_or(match self.scenario {
            Scenario::Dilation => TimeSpec::Keyword("half-ehrenfest".into()),
            Scenario::DoubleWell => TimeSpec::Keyword("ehrenfest".into()),
            Scenario::Harmonic => TimeSpec::Value(2.0 * std::f64::consts::PI),
            Scenario::Free => TimeSpec::Value(2.0),
        })
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scenario: Option<Scenario>,
    pub hbar: Option<Vec<f64>>,
    pub t_final: Option<TimeSpec>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(self, mut config: ExperimentConfig) -> ExperimentConfig {
        if let Some(s) = self.scenario {
            config.scenario = s;
        }
        if let Some(h) = self.hbar {
            config.hbar = if h.len() == 1 { HbarSpec::Single(h[0]) } else { HbarSpec::List(h) };
        }
        if let Some(t) = self.t_final {
            config.t_final = Some(t);
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(o) = self.out {
            config.output_dir = o;
        }
        config
    }
}

pub fn parse_hbar_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Config(format!("hbar: `{v}` is not a number"))))
        .collect()
}

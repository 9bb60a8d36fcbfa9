//! Experiment runner behind the `ehrenfest-lab` binary: JSON configs,
//! scenario presets, deterministic runs and ℏ sweeps with CSV/JSON output.

pub mod config;
pub mod manifest;
pub mod run;
pub mod validate;

pub use config::{Diagnostic, ExperimentConfig, HbarSpec, Overrides, Scenario, TimeSpec};
pub use manifest::RunManifest;
pub use run::{run, sweep};
pub use validate::{validate, Finding, Level, Mode};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] ehrenfest_core::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io { context: context.into(), source }
    }

    /// 2 for bad input, 3 for numerical failures, 4 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Io { .. } => 4,
            Self::Core(e) if e.is_numerical() => 3,
            Self::Core(e) if is_io(e) => 4,
            Self::Core(_) => 2,
        }
    }
}

fn is_io(e: &ehrenfest_core::Error) -> bool {
    match e {
        ehrenfest_core::Error::Io(_) => true,
        ehrenfest_core::Error::Sweep { source, .. } => is_io(source),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ehrenfest_core::Error;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::from(Error::NonFiniteState { time: 1.0 }).exit_code(), 3);
        assert_eq!(
            CliError::from(Error::MassEscape { boundary_mass: 1.0, threshold: 1e-4 }).exit_code(),
            3
        );
        let io = std::io::Error::new(std::io::ErrorKind::PermissionDenied, "no");
        assert_eq!(CliError::from(Error::Io(io)).exit_code(), 4);
        assert_eq!(CliError::from(Error::InvalidParameter("dt".into())).exit_code(), 2);
        let wrapped = Error::Sweep { hbar: 1e-3, source: Box::new(Error::NonFiniteState { time: 0.5 }) };
        assert_eq!(CliError::from(wrapped).exit_code(), 3);
    }
}

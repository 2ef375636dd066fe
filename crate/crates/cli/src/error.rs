use mzweak_core::fit::FitError;
use mzweak_core::io::IoError;
use mzweak_core::jones::JonesError;
use mzweak_core::mzi::MziError;
use mzweak_core::synth::SynthError;
use mzweak_core::weakmeas::WeakMeasError;
use thiserror::Error;

/// Failures grouped by the exit status they map to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("fit did not converge: {0}")]
    NonConvergence(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Degenerate(_) => 4,
            CliError::Io(_) => 1,
        }
    }

    /// Prefix the message, keeping the family.
    pub fn context(self, what: &str) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{what}: {m}")),
            CliError::NonConvergence(m) => CliError::NonConvergence(format!("{what}: {m}")),
            CliError::Degenerate(m) => CliError::Degenerate(format!("{what}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{what}: {m}")),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        let family = match &e {
            FitError::InsufficientFrames { first_error, .. } => first_error.as_ref(),
            other => other,
        };
        match family {
            FitError::NonConvergence { .. } => CliError::NonConvergence(e.to_string()),
            _ => CliError::Degenerate(e.to_string()),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io(err) => CliError::Io(err.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<JonesError> for CliError {
    fn from(e: JonesError) -> Self {
        match e {
            JonesError::OrthogonalSelection { .. } => CliError::Degenerate(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<MziError> for CliError {
    fn from(e: MziError) -> Self {
        match e {
            MziError::Jones(j) => j.into(),
            MziError::DegenerateScan(_) | MziError::ZeroOverlapVisibility(_) => CliError::Degenerate(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Mzi(m) => m.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<WeakMeasError> for CliError {
    fn from(e: WeakMeasError) -> Self {
        match e {
            WeakMeasError::Jones(j) => j.into(),
            WeakMeasError::ZeroPostSelection { .. } | WeakMeasError::ZeroDisplacement => CliError::Degenerate(e.to_string()),
            WeakMeasError::InvalidConfig(_) => CliError::Config(e.to_string()),
        }
    }
}

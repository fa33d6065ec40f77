use std::fmt;

use storycause::alignment::AlignmentError;
use storycause::corpus::CorpusError;
use storycause::ensemble::EnsembleError;
use storycause::gateway::GatewayError;
use storycause::metrics::MetricError;
use storycause::prompt::CatalogError;
use storycause::scoring::ScoringError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    CacheMiss,
    Validation,
    Io,
    Other,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Config => 2,
            Kind::CacheMiss => 3,
            Kind::Validation => 4,
            Kind::Io | Kind::Other => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Kind::Config => "config",
            Kind::CacheMiss => "cache_miss",
            Kind::Validation => "validation",
            Kind::Io => "io",
            Kind::Other => "other",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Kind::Config, message)
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(Kind::Validation, message)
    }

    /// `error<TAB>kind<TAB>message`, flattened to one line.
    pub fn line(&self) -> String {
        let msg = self.message.replace(['\t', '\n', '\r'], " ");
        format!("error\t{}\t{msg}", self.kind.name())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line())
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        let kind = match e {
            GatewayError::CacheMiss { .. } => Kind::CacheMiss,
            GatewayError::InvalidRequest(_) => Kind::Config,
            _ => Kind::Other,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        let kind = match e {
            CorpusError::Config(_) => Kind::Config,
            CorpusError::Validation(_) | CorpusError::Parse { .. } => Kind::Validation,
            CorpusError::Io { .. } => Kind::Io,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<ScoringError> for CliError {
    fn from(e: ScoringError) -> Self {
        match e {
            ScoringError::Gateway(g) => g.into(),
            other => CliError::validation(other.to_string()),
        }
    }
}

impl From<AlignmentError> for CliError {
    fn from(e: AlignmentError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<EnsembleError> for CliError {
    fn from(e: EnsembleError) -> Self {
        match e {
            EnsembleError::Table { .. } => CliError::validation(e.to_string()),
            _ => CliError::config(e.to_string()),
        }
    }
}

impl From<CatalogError> for CliError {
    fn from(e: CatalogError) -> Self {
        CliError::config(e.to_string())
    }
}

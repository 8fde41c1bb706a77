use orbitile::document::DocumentError;
use orbitile::graph::GraphError;
use orbitile::orbit::OrbitError;
use orbitile::overlay::OverlayError;
use orbitile::pq::PqError;
use orbitile::real::RealError;
use orbitile::render::RenderError;
use orbitile::substitution::SubstError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Failure {
    /// Exit 1; the report goes to standard output.
    #[error("{message}")]
    Validation { message: String, report: String },
    /// Exit 2.
    #[error("{0}")]
    Usage(String),
    /// Exit 3.
    #[error("{0}")]
    Undecided(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Self::Validation { .. } => 1,
            Self::Usage(_) => 2,
            Self::Undecided(_) => 3,
        }
    }

    pub fn validation(message: impl Into<String>, report: &impl serde::Serialize) -> Self {
        Self::Validation {
            message: message.into(),
            report: serde_json::to_string_pretty(report).expect("reports serialize"),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Usage(e.to_string())
    }
}

impl From<RealError> for Failure {
    fn from(e: RealError) -> Self {
        Self::Undecided(e.to_string())
    }
}

impl From<SubstError> for Failure {
    fn from(e: SubstError) -> Self {
        match e {
            SubstError::Real(r) => r.into(),
            other => Self::Usage(other.to_string()),
        }
    }
}

impl From<OverlayError> for Failure {
    fn from(e: OverlayError) -> Self {
        match e {
            OverlayError::Real(r) => r.into(),
            OverlayError::Subst(s) => s.into(),
            other => Self::Usage(other.to_string()),
        }
    }
}

impl From<OrbitError> for Failure {
    fn from(e: OrbitError) -> Self {
        match e {
            OrbitError::Subst(s) => s.into(),
            OrbitError::Overlay(o) => o.into(),
            OrbitError::Real(r) => r.into(),
            e @ OrbitError::DegenerateOffset { .. } => Self::Undecided(e.to_string()),
            e @ OrbitError::LetterNotInAlphabet { .. } => {
                let message = e.to_string();
                Self::Validation { report: serde_json::json!({ "error": message }).to_string(), message }
            }
            other => Self::Usage(other.to_string()),
        }
    }
}

impl From<PqError> for Failure {
    fn from(e: PqError) -> Self {
        match e {
            PqError::Subst(s) => s.into(),
            PqError::Overlay(o) => o.into(),
            PqError::Orbit(o) => o.into(),
            PqError::BadParameters(m) => Self::Usage(m),
            other => {
                let message = other.to_string();
                Self::Validation { report: serde_json::json!({ "error": message }).to_string(), message }
            }
        }
    }
}

impl From<DocumentError> for Failure {
    fn from(e: DocumentError) -> Self {
        match e {
            DocumentError::Subst(s) => s.into(),
            other => Self::Usage(other.to_string()),
        }
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        Self::Usage(e.to_string())
    }
}

impl From<RenderError> for Failure {
    fn from(e: RenderError) -> Self {
        let message = e.to_string();
        Self::Validation { report: serde_json::json!({ "error": message }).to_string(), message }
    }
}

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use ontocohort::{AugmentError, DataError, FilterError, GraphError};
use serde::{Deserialize, Serialize};

/// Body of every non-2xx response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub detail: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.to_owned(),
                message: message.into(),
                detail: None,
            },
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.body.detail = Some(detail.into());
        self
    }

    pub fn no_session() -> Self {
        Self::new(StatusCode::CONFLICT, "NoSession", "no data has been loaded")
    }

    pub fn no_filter() -> Self {
        Self::new(StatusCode::CONFLICT, "NoFilter", "apply a filter first")
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "InvalidRequest", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<DataError> for ApiError {
    fn from(e: DataError) -> Self {
        let code = match &e {
            DataError::Parse { .. } => "ParseError",
            DataError::DuplicateVisitId(_) => "DuplicateVisitId",
            DataError::UnknownPhenotype { .. } => "UnknownPhenotype",
            DataError::FeatureDimMismatch { .. } => "FeatureDimMismatch",
            DataError::InvalidLabel { .. } => "InvalidLabel",
            DataError::InvalidDuration(_) => "InvalidDuration",
            DataError::InvalidVocabulary(_) => "InvalidVocabulary",
            DataError::InvalidConfig(_) => "InvalidConfig",
            DataError::Io { .. } => "IoError",
        };
        let detail = match &e {
            DataError::Io { path, .. } | DataError::Parse { path, .. } => {
                Some(path.display().to_string())
            }
            _ => None,
        };
        Self {
            status: StatusCode::BAD_REQUEST,
            body: ErrorBody {
                code: code.to_owned(),
                message: e.to_string(),
                detail,
            },
        }
    }
}

impl From<GraphError> for ApiError {
    fn from(e: GraphError) -> Self {
        let code = match &e {
            GraphError::CycleDetected(_) => "CycleDetected",
            GraphError::UnknownCode(_) => "UnknownCode",
        };
        Self::new(StatusCode::BAD_REQUEST, code, e.to_string())
    }
}

impl From<FilterError> for ApiError {
    fn from(e: FilterError) -> Self {
        match &e {
            FilterError::UnknownSeedCode(c) => {
                Self::new(StatusCode::NOT_FOUND, "UnknownSeedCode", e.to_string())
                    .with_detail(c.as_str())
            }
            FilterError::UnknownPhenotype(p) => {
                Self::new(StatusCode::BAD_REQUEST, "UnknownPhenotype", e.to_string())
                    .with_detail(p.clone())
            }
            FilterError::NoSeedCodes => {
                Self::new(StatusCode::BAD_REQUEST, "NoSeedCodes", e.to_string())
            }
        }
    }
}

impl From<AugmentError> for ApiError {
    fn from(e: AugmentError) -> Self {
        match &e {
            AugmentError::SeedOutsideFilteredGraph(c) => {
                Self::new(StatusCode::NOT_FOUND, "UnknownSeedCode", e.to_string())
                    .with_detail(c.as_str())
            }
            AugmentError::UnknownCode(c) => {
                Self::new(StatusCode::NOT_FOUND, "UnknownCode", e.to_string())
                    .with_detail(c.as_str())
            }
            AugmentError::InvalidSpec(_) => {
                Self::new(StatusCode::BAD_REQUEST, "InvalidSpec", e.to_string())
            }
            AugmentError::VocabularyMismatch(_) => {
                Self::new(StatusCode::BAD_REQUEST, "VocabularyMismatch", e.to_string())
            }
        }
    }
}

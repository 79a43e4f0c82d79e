use finepot::FinepotError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Parse(String),

    #[error("unknown scenario '{name}'")]
    UnknownScenario { name: String, suggestions: Vec<String> },

    #[error("task '{task}': {source}")]
    Task {
        task: String,
        #[source]
        source: FinepotError,
    },

    #[error("task '{task}': {message}")]
    TaskPrecondition { task: String, message: String },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    /// 2 for config problems, 3 for violated task preconditions and i/o,
    /// 4 for numerical non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::UnknownScenario { .. } => 2,
            CliError::Task {
                source: FinepotError::NonConvergence { .. },
                ..
            } => 4,
            CliError::Task { .. } | CliError::TaskPrecondition { .. } | CliError::Io { .. } => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "parse",
            4 => "non_convergence",
            _ => "precondition",
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
            }
        });
        let err = &mut v["error"];
        match self {
            CliError::UnknownScenario { suggestions, .. } => err["suggestions"] = json!(suggestions),
            CliError::Task { task, source } => {
                err["task"] = json!(task);
                if let FinepotError::NonConvergence {
                    iterations,
                    kkt_residual,
                    ..
                } = source
                {
                    err["iterations"] = json!(iterations);
                    err["kkt_residual"] = json!(kkt_residual);
                }
            }
            CliError::TaskPrecondition { task, .. } => err["task"] = json!(task),
            _ => {}
        }
        v
    }
}

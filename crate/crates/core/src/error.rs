use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MathError {
    #[error("6D rotation columns are parallel or zero")]
    DegenerateInput,
    #[error("quaternion has zero or non-finite norm")]
    ZeroQuaternion,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropulsionError {
    #[error("command {index} = {value} is outside [0, 1]")]
    CommandOutOfRange { index: usize, value: f64 },
    #[error("invalid propulsion config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("simulation state became non-finite")]
    NonFiniteState,
    #[error("step called on an environment whose episode is over")]
    StepAfterDone,
    #[error(transparent)]
    Propulsion(#[from] PropulsionError),
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("policy produced a non-finite output")]
    NonFiniteOutput,
    #[error("parameter shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss in epoch {epoch}, minibatch {minibatch}")]
    NonFiniteLoss { epoch: usize, minibatch: usize },
    #[error("update {update}: {source}")]
    Env {
        update: usize,
        #[source]
        source: EnvError,
    },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("invalid PPO config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl TrainError {
    /// True for failures caused by numerics blowing up rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            TrainError::NonFiniteLoss { .. }
                | TrainError::Env {
                    source: EnvError::NonFiniteState,
                    ..
                }
                | TrainError::Policy(PolicyError::NonFiniteOutput)
        )
    }
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint parse error: {0}")]
    Parse(String),
    #[error("checkpoint fingerprint {found} does not match expected {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("checkpoint was trained under config {found}, evaluation config is {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

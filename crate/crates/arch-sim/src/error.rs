use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("trace has {pixels} pixels but a GPE group serves only {group_size}")]
    GroupOverflow { pixels: usize, group_size: usize },
    #[error("pipeline schedule is empty")]
    EmptySchedule,
    #[error("trace io: {0}")]
    TraceIo(#[from] std::io::Error),
    #[error("trace parse: {0}")]
    TraceParse(#[from] serde_json::Error),
}

//! Process exit codes.

use std::fmt;

pub const OK: i32 = 0;
pub const OTHER: i32 = 1;
pub const USAGE: i32 = 2;
pub const IO: i32 = 3;
pub const DIVERGED: i32 = 4;
pub const PARTIAL: i32 = 5;

/// Some but not all requested artifacts were produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialFailure(pub String);

impl fmt::Display for PartialFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "partial result: {}", self.0)
    }
}

impl std::error::Error for PartialFailure {}

/// Exit code for an error: configuration, constraint, shape and domain
/// problems are usage errors (2); I/O, WAV and checkpoint problems are 3;
/// numerical divergence is 4; partial results are 5.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use genextend::Error as E;
    for cause in err.chain() {
        if cause.downcast_ref::<PartialFailure>().is_some() {
            return PARTIAL;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Config(_) | E::Shape(_) | E::Domain(_) | E::Constraint(_) | E::StepIndex { .. } | E::Corpus(_) => USAGE,
                E::SamplerDivergence { .. } | E::TrainingDivergence { .. } => DIVERGED,
                E::Checkpoint(_) | E::Wav(_) | E::Io(_) | E::Json(_) => IO,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return IO;
        }
    }
    OTHER
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn codes_follow_the_cause() {
        let e: anyhow::Error = genextend::Error::Constraint("x".into()).into();
        assert_eq!(exit_code(&e), USAGE);
        let e = Err::<(), _>(genextend::Error::SamplerDivergence { step: 3 }).context("sampling").unwrap_err();
        assert_eq!(exit_code(&e), DIVERGED);
        let e: anyhow::Error = std::io::Error::other("disk").into();
        assert_eq!(exit_code(&e), IO);
        assert_eq!(exit_code(&PartialFailure("1 of 2".into()).into()), PARTIAL);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), OTHER);
    }
}

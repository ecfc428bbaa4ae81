//! Token-by-token generation under an automaton.
//!
//! Each step takes the model's next-token distribution, zeroes the tokens
//! the current state does not permit, renormalizes, samples, and follows the
//! transition for the sampled token. Generation ends in the final state,
//! which is only reachable through the end-of-sequence token.

mod engine;
mod model;
mod policy;
mod transcript;

use thiserror::Error;

use crate::vocab::TokenId;

pub use engine::{
    mask_distribution, mask_distribution_into, run_to_completion, DecodeSession, StepOutcome, DEFAULT_STEP_LIMIT,
};
pub use model::{softmax, AdversarialStub, LanguageModel, RandomLogit, ScriptedStub};
pub use policy::{Sampler, SamplingPolicy};
pub use transcript::{RunSummary, Transcript};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("every permitted token has zero probability")]
    ZeroMassSupport,
    #[error("step limit reached after {} tokens", partial.len())]
    StepLimitExceeded { partial: Vec<TokenId> },
    #[error("step limit {limit} is below the {needed} tokens the shortest output needs")]
    StepLimitTooSmall { needed: usize, limit: usize },
    #[error("distribution has length {got}, vocabulary has {expected} tokens")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("token {0} is not permitted in the current state")]
    InvalidToken(TokenId),
    #[error("session already finished")]
    Finished,
}

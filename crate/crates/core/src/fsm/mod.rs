//! Grammar automata.
//!
//! Tool-call grammars are first built as byte-level NFAs from the parameter
//! model, determinized into a [`ByteDfa`], and then lifted to a [`TokenFsm`]
//! over a vocabulary: a token transition exists from a state exactly when the
//! token's whole byte expansion can be walked through the byte DFA from that
//! state. Tokens that straddle grammar boundaries (a `": "` token crossing from
//! a parameter name into its value) need no special handling.

mod dfa;
pub mod grammar;
pub(crate) mod nfa;
mod token;

use thiserror::Error;

pub use dfa::ByteDfa;
pub use grammar::{build_param_machine, build_tool_call_dfa, build_value_dfa};
pub use token::{compile_token_fsm, fsm_stats, FsmStats, TokenFsm};

pub type StateId = u32;

/// Annotations carried from grammar construction onto automaton states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StateLabel {
    /// Inside free text: `progress` bytes of the phase's terminator anchor
    /// have been matched.
    FreeText { phase: u16, progress: u16 },
    /// Root of the tool-name selection.
    ToolSelect,
    /// First state of the argument machine of tool `0`.
    ToolEntry(u32),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FsmError {
    #[error("unsupported parameter type: {0}")]
    UnsupportedType(String),
    #[error("vocabulary cannot express the grammar: state {state} has no token path to acceptance (needs bytes {sample:?})")]
    InexpressibleGrammar { state: StateId, sample: Vec<u8> },
}

impl FsmError {
    pub fn sample_text(&self) -> Option<String> {
        match self {
            FsmError::InexpressibleGrammar { sample, .. } => Some(String::from_utf8_lossy(sample).into_owned()),
            _ => None,
        }
    }
}

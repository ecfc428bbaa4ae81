//! Session automata: a scaffold of literal text, free-text reasoning, tool
//! selection and argument generation compiled into one token automaton.

pub mod oracle;
mod scaffold;
mod session;
mod trie;

use thiserror::Error;

use crate::fsm::FsmError;

pub use oracle::{parse_session_text, validate_session_text, SessionParse};
pub use scaffold::{ScaffoldSpec, Segment};
pub use session::{build_session_dfa, build_session_fsm, SessionFsm};
pub use trie::{build_name_trie, NameTrie};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinkError {
    #[error("invalid scaffold: {0}")]
    InvalidScaffold(String),
    #[error("tool name {tool:?} cannot be written with the vocabulary")]
    InexpressibleName { tool: String },
    #[error("tool name {tool:?} does not identify a single tool")]
    AmbiguousName { tool: String },
    #[error(transparent)]
    Fsm(#[from] FsmError),
}

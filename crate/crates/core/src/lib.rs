//! Constrained decoding of tool calls.
//!
//! Tool documentation is compiled into a deterministic automaton over a
//! language model's token vocabulary. During generation the automaton's
//! per-state token mask zeroes out every token that would break the call
//! syntax, and the remaining probability mass is renormalized before sampling.
//!
//! ```
//! use tooldec::linker::{build_session_fsm, ScaffoldSpec};
//! use tooldec::schema::{parse_inventory, DocFormat};
//! use tooldec::Vocabulary;
//!
//! let doc = br#"[{"tool_name": "ping", "description": "Liveness check.", "params": []}]"#;
//! let inv = parse_inventory(doc, DocFormat::SimpleJson).unwrap();
//! let mut tokens: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
//! tokens.push(b"<EOS>".to_vec());
//! let vocab = Vocabulary::new(tokens, 256).unwrap();
//! let session = build_session_fsm(&inv, &vocab, &ScaffoldSpec::bare_call()).unwrap();
//!
//! let mut call = vocab.tokenize_greedy(b"ping()").unwrap();
//! call.push(vocab.eos());
//! assert!(session.accepts(&call));
//! ```

pub mod artifact;
pub mod decode;
pub mod fsm;
pub mod linker;
pub mod mask;
pub mod prompt;
pub mod schema;
pub mod vocab;

pub use artifact::{Artifact, ArtifactError};
pub use decode::{DecodeError, DecodeSession, LanguageModel, Sampler, SamplingPolicy};
pub use fsm::{FsmError, StateId, TokenFsm};
pub use linker::{build_session_fsm, LinkError, ScaffoldSpec, SessionFsm};
pub use mask::TokenMask;
pub use schema::{parse_inventory, DocFormat, ToolInventory, ToolSchema};
pub use vocab::{load_vocab, TokenId, Vocabulary};

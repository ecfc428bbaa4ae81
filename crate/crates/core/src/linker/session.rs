use super::scaffold::{ScaffoldSpec, Segment};
use super::trie::{build_name_trie, NameTrie};
use super::{oracle, LinkError};
use crate::fsm::grammar::{arguments, finish, free_text};
use crate::fsm::nfa::Frag;
use crate::fsm::{compile_token_fsm, ByteDfa, StateId, StateLabel, TokenFsm};
use crate::schema::{ToolInventory, ValidationReport};
use crate::vocab::{TokenId, Vocabulary};

/// Token automaton for a whole scaffolded session: free-text phases, tool
/// selection and the selected tool's arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionFsm {
    fsm: TokenFsm,
    inventory: ToolInventory,
    scaffold: ScaffoldSpec,
    trie: NameTrie,
    select_state: Option<StateId>,
    tool_entries: Vec<Option<StateId>>,
}

pub fn build_session_fsm(inv: &ToolInventory, v: &Vocabulary, scaffold: &ScaffoldSpec) -> Result<SessionFsm, LinkError> {
    let trie = build_name_trie(inv, v, scaffold.name_terminator())?;
    let dfa = build_session_dfa(inv, scaffold)?;
    let fsm = compile_token_fsm(&dfa, v)?;
    SessionFsm::from_parts(fsm, inv.clone(), scaffold.clone(), trie)
}

/// Byte-level automaton for a scaffolded session, before token lifting.
/// Token states of the compiled session point back into it through
/// [`TokenFsm::origin`].
pub fn build_session_dfa(inv: &ToolInventory, scaffold: &ScaffoldSpec) -> Result<ByteDfa, LinkError> {
    let dfa = finish(|nfa| {
        let sel = scaffold.select_index();
        let mut parts = Vec::new();
        let mut phase = 0u16;
        for (i, seg) in scaffold.segments().iter().enumerate() {
            match seg {
                _ if i == sel + 1 || i == sel + 2 => {}
                Segment::Literal(t) => parts.push(nfa.literal(t.as_bytes())),
                Segment::FreeText { anchor } => {
                    parts.push(free_text(nfa, anchor.as_bytes(), phase));
                    phase += 1;
                }
                Segment::ToolSelect => {
                    let mut alts = Vec::with_capacity(inv.len());
                    for (k, tool) in inv.tools.iter().enumerate() {
                        let mut head = tool.tool_name.as_bytes().to_vec();
                        head.extend_from_slice(scaffold.name_terminator());
                        let head = nfa.literal(&head);
                        let entry = nfa.state();
                        nfa.label(entry, StateLabel::ToolEntry(k as u32));
                        nfa.eps(head.end, entry);
                        let args = arguments(nfa, &tool.params, scaffold.arg_style())?;
                        nfa.eps(entry, args.start);
                        alts.push(Frag { start: head.start, end: args.end });
                    }
                    let choice = nfa.alt(&alts);
                    nfa.label(choice.start, StateLabel::ToolSelect);
                    parts.push(choice);
                }
                Segment::ArgObject | Segment::ArgList | Segment::Terminal => {}
            }
        }
        Ok(nfa.seq(&parts))
    })?;
    Ok(dfa)
}

impl SessionFsm {
    /// Reassembles a session from a previously compiled automaton.
    pub(crate) fn from_parts(
        fsm: TokenFsm,
        inventory: ToolInventory,
        scaffold: ScaffoldSpec,
        trie: NameTrie,
    ) -> Result<Self, LinkError> {
        let find = |label: StateLabel| (0..fsm.state_count() as StateId).find(|&s| fsm.labels(s).contains(&label));
        let select_state = find(StateLabel::ToolSelect);
        let tool_entries = (0..inventory.len()).map(|k| find(StateLabel::ToolEntry(k as u32))).collect();
        Ok(SessionFsm { fsm, inventory, scaffold, trie, select_state, tool_entries })
    }

    pub fn fsm(&self) -> &TokenFsm {
        &self.fsm
    }

    pub fn inventory(&self) -> &ToolInventory {
        &self.inventory
    }

    pub fn scaffold(&self) -> &ScaffoldSpec {
        &self.scaffold
    }

    pub fn name_trie(&self) -> &NameTrie {
        &self.trie
    }

    /// Token state at the root of tool selection, when a token boundary
    /// falls exactly there.
    pub fn select_state(&self) -> Option<StateId> {
        self.select_state
    }

    /// Token state where tool `k`'s arguments begin, when a token boundary
    /// falls exactly there.
    pub fn tool_entry(&self, k: usize) -> Option<StateId> {
        self.tool_entries[k]
    }

    /// Tool whose argument machine starts at state `s`.
    pub fn tool_at(&self, s: StateId) -> Option<usize> {
        self.fsm.labels(s).iter().find_map(|l| match l {
            StateLabel::ToolEntry(k) => Some(*k as usize),
            _ => None,
        })
    }

    pub fn accepts(&self, tokens: &[TokenId]) -> bool {
        self.fsm.accepts(tokens)
    }

    /// Checks `text` with the reference parser (never the automaton).
    pub fn validate_text(&self, text: &[u8]) -> ValidationReport {
        oracle::validate_session_text(&self.inventory, &self.scaffold, text)
    }
}
